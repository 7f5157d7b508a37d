//! Reasoning backends: a scripted rule table for reproducible runs and a
//! remote endpoint for live use. Also token accounting.
//!
//! Rules file grammar (TOML):
//!
//! ```toml
//! [[rule]]
//! agent = "computational_chemist"   # or "*"
//! last_kind = "user"                # optional: kind of the newest message
//! last_contains = "conformers"      # optional: substring of its body or summary
//! contains = "..."                  # optional: substring of the rendered context
//! [rule.decision]
//! action = "delegate"               # invoke_tool | delegate | respond | fail
//! target = "perform_dft_calculation"
//! body = "Optimize the conformers. {last}"
//! ```
//!
//! `{last}` in any decision string is replaced by the newest message's
//! summary (or body when it has none). First matching rule wins.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const LIVE_URL_ENV: &str = "QFLOW_LLM_URL";
pub const LIVE_KEY_ENV: &str = "QFLOW_LLM_KEY";
pub const LIVE_ATTEMPTS: u32 = 3;

/// ceil(bytes / 4)
pub fn count_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Decision {
    InvokeTool {
        tool: String,
        #[serde(default)]
        args: Map<String, Value>,
    },
    Delegate {
        target: String,
        body: String,
    },
    Respond {
        summary: String,
    },
    Fail {
        reason: String,
    },
}

impl Decision {
    /// Tool or child the decision acts on.
    pub fn target(&self) -> Option<&str> {
        match self {
            Decision::InvokeTool { tool, .. } => Some(tool),
            Decision::Delegate { target, .. } => Some(target),
            _ => None,
        }
    }

    fn fill(&self, last: &str) -> Decision {
        let sub = |s: &str| s.replace("{last}", last);
        fn sub_value(v: &Value, last: &str) -> Value {
            match v {
                Value::String(s) => Value::String(s.replace("{last}", last)),
                Value::Array(a) => Value::Array(a.iter().map(|x| sub_value(x, last)).collect()),
                Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), sub_value(x, last))).collect()),
                other => other.clone(),
            }
        }
        match self {
            Decision::InvokeTool { tool, args } => Decision::InvokeTool {
                tool: tool.clone(),
                args: args.iter().map(|(k, v)| (k.clone(), sub_value(v, last))).collect(),
            },
            Decision::Delegate { target, body } => Decision::Delegate {
                target: target.clone(),
                body: sub(body),
            },
            Decision::Respond { summary } => Decision::Respond { summary: sub(summary) },
            Decision::Fail { reason } => Decision::Fail { reason: sub(reason) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LastMessage {
    pub kind: String,
    pub body: String,
    #[serde(default)]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningRequest {
    pub agent_id: String,
    pub rendered_context: String,
    pub allowed_actions: Vec<String>,
    /// Newest conversation message, for rule matching.
    #[serde(default)]
    pub last: Option<LastMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub decision: Decision,
    pub raw: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("reasoning endpoint unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("malformed model reply: {message}")]
    Parse { raw: String, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait ReasoningBackend: Send {
    fn id(&self) -> &str;
    fn decide(&mut self, request: &ReasoningRequest) -> Result<Reply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(default = "any_agent")]
    pub agent: String,
    #[serde(default)]
    pub last_kind: Option<String>,
    #[serde(default)]
    pub last_contains: Option<String>,
    #[serde(default)]
    pub contains: Option<String>,
    pub decision: Decision,
}

fn any_agent() -> String {
    "*".into()
}

impl Rule {
    fn matches(&self, req: &ReasoningRequest) -> bool {
        if self.agent != "*" && self.agent != req.agent_id {
            return false;
        }
        if let Some(needle) = &self.contains {
            if !req.rendered_context.contains(needle.as_str()) {
                return false;
            }
        }
        if self.last_kind.is_none() && self.last_contains.is_none() {
            return true;
        }
        let Some(last) = &req.last else { return false };
        if self.last_kind.as_ref().is_some_and(|k| *k != last.kind) {
            return false;
        }
        match &self.last_contains {
            Some(needle) => {
                last.body.contains(needle.as_str())
                    || last.summary.as_deref().is_some_and(|s| s.contains(needle.as_str()))
            }
            None => true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    #[serde(default, rename = "rule")]
    pub rules: Vec<Rule>,
}

impl ScriptedPolicy {
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        toml::from_str(text).map_err(|e| BackendError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The first matching rule's decision, or a fail decision.
    pub fn lookup(&self, req: &ReasoningRequest) -> Decision {
        let last = req
            .last
            .as_ref()
            .map(|l| l.summary.clone().unwrap_or_else(|| l.body.clone()))
            .unwrap_or_default();
        self.rules
            .iter()
            .find(|r| r.matches(req))
            .map(|r| r.decision.fill(&last))
            .unwrap_or_else(|| Decision::Fail {
                reason: "no applicable action".into(),
            })
    }
}

impl ReasoningBackend for ScriptedPolicy {
    fn id(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, request: &ReasoningRequest) -> Result<Reply, BackendError> {
        let decision = self.lookup(request);
        let raw = serde_json::to_string(&decision).expect("decisions serialize");
        Ok(Reply { decision, raw })
    }
}

/// Parses a model reply: a decision object, optionally wrapped as
/// `{"decision": {...}}`.
pub fn parse_reply(raw: &str) -> Result<Decision, BackendError> {
    let err = |message: String| BackendError::Parse {
        raw: raw.to_string(),
        message,
    };
    let v: Value = serde_json::from_str(raw.trim()).map_err(|e| err(e.to_string()))?;
    let v = match v.get("decision") {
        Some(inner) => inner.clone(),
        None => v,
    };
    serde_json::from_value(v).map_err(|e| err(e.to_string()))
}

/// Remote model endpoint. Requests are `POST <url>` with a JSON body
/// `{agent_id, context, allowed_actions}`; the reply body must parse with
/// [`parse_reply`].
#[derive(Debug, Clone)]
pub struct LiveBackend {
    pub url: String,
    pub key: Option<String>,
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl LiveBackend {
    pub fn new(url: &str, key: Option<String>) -> Self {
        Self {
            url: url.to_string(),
            key,
            attempts: LIVE_ATTEMPTS,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(LIVE_URL_ENV).map_err(|_| BackendError::Config(format!("{LIVE_URL_ENV} is not set")))?;
        Ok(Self::new(&url, std::env::var(LIVE_KEY_ENV).ok()))
    }

    fn call(&self, request: &ReasoningRequest) -> Result<String, String> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({
            "agent_id": request.agent_id,
            "context": request.rendered_context,
            "allowed_actions": request.allowed_actions,
        });
        match req.send_json(body) {
            Ok(resp) => resp.into_string().map_err(|e| e.to_string()),
            Err(ureq::Error::Status(code, resp)) => Err(format!("HTTP {code}: {}", resp.into_string().unwrap_or_default())),
            Err(e) => Err(e.to_string()),
        }
    }
}

impl ReasoningBackend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn decide(&mut self, request: &ReasoningRequest) -> Result<Reply, BackendError> {
        let mut last_err = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.call(request) {
                Ok(raw) => {
                    let decision = parse_reply(&raw)?;
                    return Ok(Reply { decision, raw });
                }
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "reasoning endpoint call failed");
                    last_err = e;
                }
            }
        }
        Err(BackendError::Unreachable {
            attempts: self.attempts,
            message: last_err,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub agent_id: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Increments each time a forgetful agent's context is cleared.
    pub episode: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub tokens_in: u64,
    pub tokens_out: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub records: Vec<UsageRecord>,
    episodes: BTreeMap<String, u32>,
}

impl UsageLedger {
    pub fn record(&mut self, agent_id: &str, tokens_in: u64, tokens_out: u64) -> UsageRecord {
        let rec = UsageRecord {
            agent_id: agent_id.to_string(),
            tokens_in,
            tokens_out,
            episode: self.episodes.get(agent_id).copied().unwrap_or(0),
        };
        self.records.push(rec.clone());
        rec
    }

    /// Marks a context clear for `agent_id`.
    pub fn end_episode(&mut self, agent_id: &str) {
        *self.episodes.entry(agent_id.to_string()).or_insert(0) += 1;
    }

    pub fn per_agent(&self) -> BTreeMap<String, Usage> {
        let mut out: BTreeMap<String, Usage> = BTreeMap::new();
        for r in &self.records {
            let u = out.entry(r.agent_id.clone()).or_default();
            u.tokens_in += r.tokens_in;
            u.tokens_out += r.tokens_out;
        }
        out
    }

    pub fn session(&self) -> Usage {
        self.records.iter().fold(Usage::default(), |acc, r| Usage {
            tokens_in: acc.tokens_in + r.tokens_in,
            tokens_out: acc.tokens_out + r.tokens_out,
        })
    }

    /// Context length at the last request of every (agent, episode), in
    /// first-seen order.
    pub fn final_contexts(&self) -> Vec<(String, u64)> {
        let mut order: Vec<(String, u32)> = Vec::new();
        let mut last: BTreeMap<(String, u32), u64> = BTreeMap::new();
        for r in &self.records {
            let key = (r.agent_id.clone(), r.episode);
            if !last.contains_key(&key) {
                order.push(key.clone());
            }
            last.insert(key, r.tokens_in);
        }
        order.into_iter().map(|k| (k.0.clone(), last[&k])).collect()
    }
}
