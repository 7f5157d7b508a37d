//! The per-session decision loop: one agent acts per step, on top of a
//! stack of open delegations.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{
    describe_callables, estimate, render_context, Hierarchy, Message, MessageKind, NodeKind,
    WorkingMemory,
};
use crate::clock::Clock;
use crate::exec::ExecBackend;
use crate::memory::{
    snapshot_grounding, EpisodicRecord, EpisodicStore, GlobalMemory, SemanticMemory,
    DEFAULT_GROUNDING_DEPTH, DEFAULT_GROUNDING_MAX_ENTRIES, DEFAULT_LAST_K,
};
use crate::orca::KeywordCatalog;
use crate::reasoning::{count_tokens, Decision, LastMessage, ReasoningBackend, ReasoningRequest, Usage, UsageLedger};
use crate::recovery::RecoveryOptions;
use crate::thermo::Constants;
use crate::tools::{ToolContext, ToolRegistry, ToolResult, DEFAULT_SUMMARY_CAP};
use crate::trace::{Counters, EventKind, NewEvent, ToolCall, Trace};
use crate::util::truncate_chars;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_steps: usize,
    pub max_depth: usize,
    /// Re-asks after an invalid decision before it becomes a failure.
    pub retry_cap: u32,
    pub summary_cap: usize,
    pub last_k: usize,
    pub grounding_depth: usize,
    pub grounding_max_entries: usize,
    pub node_cores: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: 500,
            max_depth: super::MAX_DEPTH,
            retry_cap: 2,
            summary_cap: DEFAULT_SUMMARY_CAP,
            last_k: DEFAULT_LAST_K,
            grounding_depth: DEFAULT_GROUNDING_DEPTH,
            grounding_max_entries: DEFAULT_GROUNDING_MAX_ENTRIES,
            node_cores: 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Running,
    Paused,
    Done,
    Failed,
    BudgetExceeded,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Done | SessionState::Failed | SessionState::BudgetExceeded)
    }
}

/// Pause before `agent` performs an action of `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub agent: String,
    pub kind: EventKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("session is {0:?}")]
    Finished(SessionState),
    #[error("session is not paused")]
    NotPaused,
    #[error("{0}")]
    Storage(String),
}

/// Everything a session is built from.
pub struct SessionParts {
    pub id: String,
    pub task: String,
    pub workdir: PathBuf,
    pub hierarchy: Hierarchy,
    pub tools: ToolRegistry,
    /// Keyed by model binding; `default` serves agents without a match.
    pub backends: BTreeMap<String, Box<dyn ReasoningBackend>>,
    pub exec: Box<dyn ExecBackend>,
    pub catalog: KeywordCatalog,
    pub constants: Constants,
    pub recovery: RecoveryOptions,
    pub semantic: SemanticMemory,
    pub global: GlobalMemory,
    pub trace: Trace,
    pub clock: Clock,
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResult {
    pub session_id: String,
    pub status: SessionState,
    pub final_response: Option<String>,
    pub counters: Counters,
    pub steps: usize,
    /// Deepest delegation reached, in levels below the root.
    pub max_depth: usize,
    pub usage: Usage,
    /// Final context length per (agent, episode).
    pub final_contexts: Vec<(String, u64)>,
    /// Root final context over the sum of all final contexts.
    pub root_context_ratio: f64,
    pub recovery_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub depth: Option<usize>,
    /// `active` on top of the stack, `waiting` below it, else `idle`.
    pub status: &'static str,
    pub last_kind: Option<EventKind>,
    pub last_ts: Option<String>,
    pub current_tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
struct Frame {
    agent: String,
    parent: Option<String>,
    exchange: Option<u64>,
    retries: u32,
}

#[derive(Debug, Clone)]
struct Pending {
    agent: String,
    decision: Decision,
    raw: String,
}

pub struct Session {
    id: String,
    workdir: PathBuf,
    hierarchy: Hierarchy,
    tools: ToolRegistry,
    backends: BTreeMap<String, Box<dyn ReasoningBackend>>,
    exec: Box<dyn ExecBackend>,
    catalog: KeywordCatalog,
    constants: Constants,
    recovery: RecoveryOptions,
    semantic: SemanticMemory,
    global: GlobalMemory,
    episodic: EpisodicStore,
    trace: Trace,
    clock: Clock,
    limits: Limits,
    usage: UsageLedger,

    messages: Vec<Message>,
    conversations: BTreeMap<String, Vec<usize>>,
    stack: Vec<Frame>,
    pending: Option<Pending>,
    inbox: VecDeque<(String, String)>,
    breakpoints: Vec<Breakpoint>,
    pause_requested: bool,
    state: SessionState,
    steps: usize,
    next_exchange: u64,
    max_depth_seen: usize,
    final_response: Option<String>,
    recovery_exhausted: bool,
    notices: Vec<String>,
}

fn event_kind(d: &Decision) -> EventKind {
    match d {
        Decision::InvokeTool { .. } => EventKind::Acting,
        Decision::Delegate { .. } => EventKind::Commanding,
        Decision::Respond { .. } | Decision::Fail { .. } => EventKind::Reporting,
    }
}

impl Session {
    /// Creates the workdir, records the task and puts the root on the stack.
    pub fn start(parts: SessionParts) -> Result<Self, SessionError> {
        std::fs::create_dir_all(&parts.workdir)
            .map_err(|e| SessionError::Storage(format!("{}: {e}", parts.workdir.display())))?;
        let mut tools = parts.tools;
        tools.set_summary_cap(parts.limits.summary_cap);
        let root = parts.hierarchy.root().id.clone();
        let mut s = Self {
            id: parts.id,
            workdir: parts.workdir,
            hierarchy: parts.hierarchy,
            tools,
            backends: parts.backends,
            exec: parts.exec,
            catalog: parts.catalog,
            constants: parts.constants,
            recovery: parts.recovery,
            semantic: parts.semantic,
            global: parts.global,
            episodic: EpisodicStore::default(),
            trace: parts.trace,
            clock: parts.clock,
            limits: parts.limits,
            usage: UsageLedger::default(),
            messages: Vec::new(),
            conversations: BTreeMap::new(),
            stack: Vec::new(),
            pending: None,
            inbox: VecDeque::new(),
            breakpoints: Vec::new(),
            pause_requested: false,
            state: SessionState::Running,
            steps: 0,
            next_exchange: 1,
            max_depth_seen: 0,
            final_response: None,
            recovery_exhausted: false,
            notices: Vec::new(),
        };
        s.deliver_user(&root, &parts.task)?;
        s.stack.push(Frame {
            agent: root,
            parent: None,
            exchange: None,
            retries: 0,
        });
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn tools(&self) -> &ToolRegistry {
        &self.tools
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn usage(&self) -> &UsageLedger {
        &self.usage
    }

    pub fn global(&self) -> &GlobalMemory {
        &self.global
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// Pause/resume and breakpoint notices; kept out of the trace so a
    /// paused run and an uninterrupted one record the same events.
    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    pub fn enable_episodic(&mut self, on: bool) {
        self.episodic.enabled = on;
    }

    pub fn episodic(&self) -> &EpisodicStore {
        &self.episodic
    }

    /// The agent's own message history.
    pub fn conversation(&self, agent: &str) -> Vec<&Message> {
        self.conversations
            .get(agent)
            .map(|ix| ix.iter().map(|&i| &self.messages[i]).collect())
            .unwrap_or_default()
    }

    pub fn set_breakpoints(&mut self, bps: Vec<Breakpoint>) -> Result<(), SessionError> {
        if let Some(b) = bps.iter().find(|b| !self.hierarchy.is_agent(&b.agent)) {
            return Err(SessionError::UnknownAgent(b.agent.clone()));
        }
        self.breakpoints = bps;
        Ok(())
    }

    pub fn add_breakpoint(&mut self, bp: Breakpoint) -> Result<(), SessionError> {
        let mut all = self.breakpoints.clone();
        if !all.contains(&bp) {
            all.push(bp);
        }
        self.set_breakpoints(all)
    }

    /// Takes effect at the next step boundary.
    pub fn request_pause(&mut self) -> Result<(), SessionError> {
        match self.state {
            SessionState::Running => {
                self.pause_requested = true;
                Ok(())
            }
            SessionState::Paused => Ok(()),
            s => Err(SessionError::Finished(s)),
        }
    }

    pub fn resume(&mut self) -> Result<(), SessionError> {
        match self.state {
            SessionState::Paused => {
                self.state = SessionState::Running;
                self.notices.push(format!("resumed after step {}", self.steps));
                Ok(())
            }
            SessionState::Running => Err(SessionError::NotPaused),
            s => Err(SessionError::Finished(s)),
        }
    }

    /// Queues a user message for `agent`, delivered at the next step.
    pub fn post_message(&mut self, agent: &str, text: &str) -> Result<(), SessionError> {
        if !self.hierarchy.is_agent(agent) {
            return Err(SessionError::UnknownAgent(agent.to_string()));
        }
        if self.state.is_terminal() {
            return Err(SessionError::Finished(self.state));
        }
        self.inbox.push_back((agent.to_string(), text.to_string()));
        Ok(())
    }

    pub fn working_memory(&self, agent: &str) -> Result<WorkingMemory, SessionError> {
        let spec = self
            .hierarchy
            .get(agent)
            .ok_or_else(|| SessionError::UnknownAgent(agent.to_string()))?;
        let mut wm = WorkingMemory {
            agent: agent.to_string(),
            global_excerpt: self.global.last_k(self.limits.last_k).to_vec(),
            conversation: self.conversation(agent).into_iter().cloned().collect(),
            grounding: spec.grounding.then(|| {
                snapshot_grounding(&self.workdir, self.limits.grounding_depth, self.limits.grounding_max_entries)
            }),
            retrieved: self
                .semantic
                .retrieve(agent, &spec.semantic_keys)
                .into_iter()
                .cloned()
                .collect(),
            token_estimate: 0,
        };
        wm.token_estimate = estimate(&self.render(agent, &wm));
        Ok(wm)
    }

    fn render(&self, agent: &str, wm: &WorkingMemory) -> String {
        let spec = self.hierarchy.get(agent).expect("checked by caller");
        render_context(spec, &describe_callables(spec, &self.hierarchy, &self.tools), wm)
    }

    /// Rendered context an agent would see now.
    pub fn rendered_context(&self, agent: &str) -> Result<String, SessionError> {
        let wm = self.working_memory(agent)?;
        Ok(self.render(agent, &wm))
    }

    /// Steps until the session leaves the running state.
    pub fn run(&mut self) -> SessionResult {
        while self.step_once() == SessionState::Running {}
        self.result()
    }

    pub fn result(&self) -> SessionResult {
        let finals = self.usage.final_contexts();
        let total: u64 = finals.iter().map(|(_, t)| t).sum();
        let root = &self.hierarchy.root().id;
        let root_total: u64 = finals.iter().filter(|(a, _)| a == root).map(|(_, t)| t).sum();
        SessionResult {
            session_id: self.id.clone(),
            status: self.state,
            final_response: self.final_response.clone(),
            counters: self.trace.counters(),
            steps: self.steps,
            max_depth: self.max_depth_seen,
            usage: self.usage.session(),
            root_context_ratio: if total == 0 { 0.0 } else { root_total as f64 / total as f64 },
            final_contexts: finals,
            recovery_exhausted: self.recovery_exhausted,
        }
    }

    pub fn graph(&self) -> AgentGraph {
        let top = self.stack.last().map(|f| f.agent.as_str());
        let mut nodes = Vec::new();
        for (id, kind) in self.hierarchy.nodes() {
            let last = self.trace.events().iter().rev().find(|e| match kind {
                NodeKind::Agent => e.agent == id,
                NodeKind::Tool => e.target.as_deref() == Some(id.as_str()),
            });
            let status = if top == Some(id.as_str()) && !self.state.is_terminal() {
                "active"
            } else if kind == NodeKind::Agent && self.stack.iter().any(|f| f.agent == id) && !self.state.is_terminal() {
                "waiting"
            } else {
                "idle"
            };
            let current_tool = match (&self.pending, status) {
                (Some(Pending { agent, decision: Decision::InvokeTool { tool, .. }, .. }), "active") if *agent == id => {
                    Some(tool.clone())
                }
                _ => last
                    .filter(|e| status == "active" && e.kind == EventKind::Acting)
                    .and_then(|e| e.target.clone()),
            };
            nodes.push(GraphNode {
                depth: self.hierarchy.depth(&id),
                id,
                kind,
                status,
                last_kind: last.map(|e| e.kind),
                last_ts: last.map(|e| e.ts.clone()),
                current_tool,
            });
        }
        AgentGraph {
            nodes,
            edges: self.hierarchy.edges(),
        }
    }

    fn now(&self) -> String {
        self.clock.now()
    }

    fn push_message(
        &mut self,
        kind: MessageKind,
        from: &str,
        to: &str,
        body: &str,
        summary: Option<String>,
        exchange: Option<u64>,
    ) {
        let msg = Message {
            id: self.messages.len() as u64 + 1,
            session_id: self.id.clone(),
            kind,
            from: from.to_string(),
            to: to.to_string(),
            body: body.to_string(),
            summary,
            timestamp: self.now(),
            exchange,
        };
        let idx = self.messages.len();
        self.messages.push(msg);
        for party in [from, to] {
            if self.hierarchy.is_agent(party) {
                let conv = self.conversations.entry(party.to_string()).or_default();
                if conv.last() != Some(&idx) {
                    conv.push(idx);
                }
            }
        }
    }

    fn record(&mut self, ev: NewEvent) {
        let ts = self.now();
        if let Err(e) = self.trace.record(ev, &ts) {
            self.notices.push(format!("trace degraded: {e}"));
            tracing::error!(error = %e, "trace write failed");
        }
    }

    fn deliver_user(&mut self, agent: &str, text: &str) -> Result<(), SessionError> {
        self.push_message(MessageKind::User, "user", agent, text, None, None);
        let mut ev = NewEvent::new("user", EventKind::User, "message", text);
        ev.target = Some(agent.to_string());
        let ts = self.now();
        self.trace
            .record(ev, &ts)
            .map(|_| ())
            .map_err(|e| SessionError::Storage(e.to_string()))
    }

    /// Runs one step: deliver queued messages, ask the top agent for a
    /// decision and carry it out.
    pub fn step_once(&mut self) -> SessionState {
        if self.state != SessionState::Running {
            return self.state;
        }
        while let Some((agent, text)) = self.inbox.pop_front() {
            if let Err(e) = self.deliver_user(&agent, &text) {
                self.notices.push(e.to_string());
            }
        }
        if self.pause_requested {
            self.pause_requested = false;
            self.state = SessionState::Paused;
            self.notices.push(format!("paused after step {}", self.steps));
            return self.state;
        }
        if self.steps >= self.limits.max_steps {
            self.state = SessionState::BudgetExceeded;
            self.record(NewEvent::new(
                "system",
                EventKind::System,
                "budget exceeded",
                format!("stopped after {} steps", self.steps),
            ));
            return self.state;
        }
        let Some(frame) = self.stack.last() else {
            self.state = SessionState::Done;
            return self.state;
        };
        let agent = frame.agent.clone();

        let (decision, raw) = match self.pending.take() {
            Some(p) => (p.decision, p.raw),
            None => {
                let Some((decision, raw)) = self.decide(&agent) else {
                    self.steps += 1;
                    return self.state;
                };
                let kind = event_kind(&decision);
                if self.breakpoints.iter().any(|b| b.agent == agent && b.kind == kind) {
                    self.notices.push(format!("breakpoint ({agent}, {}) before step {}", kind.as_str(), self.steps + 1));
                    self.pending = Some(Pending { agent, decision, raw });
                    self.state = SessionState::Paused;
                    return self.state;
                }
                (decision, raw)
            }
        };
        self.steps += 1;
        self.execute(&agent, decision, raw);
        self.state
    }

    /// Asks the agent's backend. Returns `None` when the step was spent on
    /// an invalid reply that will be re-asked.
    fn decide(&mut self, agent: &str) -> Option<(Decision, String)> {
        let wm = match self.working_memory(agent) {
            Ok(wm) => wm,
            Err(e) => return Some((Decision::Fail { reason: e.to_string() }, String::new())),
        };
        let rendered = self.render(agent, &wm);
        let spec = self.hierarchy.get(agent).expect("agent on stack is registered").clone();
        let last = wm.conversation.last().map(|m| LastMessage {
            kind: m.kind.as_str().to_string(),
            body: m.body.clone(),
            summary: m.summary.clone(),
        });
        let request = ReasoningRequest {
            agent_id: agent.to_string(),
            rendered_context: rendered,
            allowed_actions: spec.callable_modules.clone(),
            last,
        };
        let tokens_in = count_tokens(&request.rendered_context);
        let backend = match self.backends.contains_key(&spec.model_binding) {
            true => self.backends.get_mut(&spec.model_binding),
            false => self.backends.get_mut("default"),
        };
        let reply = match backend {
            Some(b) => b.decide(&request).map_err(|e| (e.to_string(), raw_of(&e))),
            None => Err((format!("no reasoning backend bound to {:?}", spec.model_binding), None)),
        };
        let problem = match reply {
            Ok(reply) => {
                self.usage.record(agent, tokens_in, count_tokens(&reply.raw));
                match self.check_action(&spec.callable_modules, &reply.decision) {
                    None => {
                        if let Some(f) = self.stack.last_mut() {
                            f.retries = 0;
                        }
                        return Some((reply.decision, reply.raw));
                    }
                    Some(why) => (why, Some(reply.raw)),
                }
            }
            Err((why, raw)) => {
                self.usage.record(agent, tokens_in, 0);
                (why, raw)
            }
        };
        let (why, raw) = problem;
        let frame = self.stack.last_mut().expect("agent is on the stack");
        frame.retries += 1;
        let mut ev = NewEvent::new(agent, EventKind::System, "invalid decision", why.clone());
        ev.raw = raw.clone();
        self.record(ev);
        if self.stack.last().map_or(0, |f| f.retries) > self.limits.retry_cap {
            return Some((Decision::Fail { reason: why }, raw.unwrap_or_default()));
        }
        self.push_message(MessageKind::Error, "system", agent, &format!("{why}; choose again"), None, None);
        None
    }

    fn check_action(&self, callable: &[String], d: &Decision) -> Option<String> {
        let allowed = |t: &str| callable.iter().any(|c| c == t);
        match d {
            Decision::InvokeTool { tool, .. } if !allowed(tool) || !self.tools.contains(tool) => {
                Some(format!("action-space violation: {tool} is not a callable tool"))
            }
            Decision::Delegate { target, .. } if !allowed(target) || !self.hierarchy.is_agent(target) => {
                Some(format!("action-space violation: {target} is not a callable agent"))
            }
            Decision::Delegate { target, .. } if self.stack.len() > self.limits.max_depth => Some(format!(
                "protocol error: delegating to {target} would exceed depth {}",
                self.limits.max_depth
            )),
            _ => None,
        }
    }

    fn execute(&mut self, agent: &str, decision: Decision, raw: String) {
        let cap = self.limits.summary_cap;
        match decision {
            Decision::InvokeTool { tool, args } => {
                let call = ToolCall { tool: tool.clone(), args: args.clone() };
                self.push_message(MessageKind::ToolCall, agent, &tool, &call.expression(), None, None);
                let result = {
                    let mut ctx = ToolContext {
                        workdir: &self.workdir,
                        agent,
                        exec: self.exec.as_mut(),
                        catalog: &self.catalog,
                        constants: &self.constants,
                        recovery: self.recovery,
                        node_cores: self.limits.node_cores,
                        global: &mut self.global,
                        clock: &self.clock,
                    };
                    self.tools
                        .invoke(&mut ctx, &tool, &args)
                        .unwrap_or_else(|e| ToolResult::failure(e.to_string()))
                };
                if result.exhausted {
                    self.recovery_exhausted = true;
                }
                let payload = json!({
                    "ok": result.ok,
                    "payload": result.payload,
                    "artifacts": result.artifacts,
                    "notes": result.notes,
                });
                let mut ev = NewEvent::new(agent, EventKind::Acting, tool.clone(), result.summary.clone());
                ev.target = Some(tool.clone());
                ev.call = Some(call);
                ev.payload = Some(serde_json::to_string_pretty(&payload).expect("json"));
                ev.raw = Some(raw);
                self.record(ev);
                let body = if result.ok {
                    result.summary.clone()
                } else {
                    format!("FAILED: {}", result.summary)
                };
                self.push_message(MessageKind::ToolResult, &tool, agent, &body, None, None);
            }
            Decision::Delegate { target, body } => {
                let exchange = self.next_exchange;
                self.next_exchange += 1;
                self.push_message(MessageKind::Command, agent, &target, &body, None, Some(exchange));
                let mut ev = NewEvent::new(agent, EventKind::Commanding, "delegate", truncate_chars(&body, cap));
                ev.target = Some(target.clone());
                ev.exchange = Some(exchange);
                ev.raw = Some(raw);
                self.record(ev);
                self.stack.push(Frame {
                    agent: target,
                    parent: Some(agent.to_string()),
                    exchange: Some(exchange),
                    retries: 0,
                });
                self.max_depth_seen = self.max_depth_seen.max(self.stack.len() - 1);
            }
            Decision::Respond { summary } => self.close_frame(agent, truncate_chars(&summary, cap), raw, false),
            Decision::Fail { reason } => self.close_frame(agent, truncate_chars(&reason, cap), raw, true),
        }
    }

    fn close_frame(&mut self, agent: &str, text: String, raw: String, failed: bool) {
        let frame = self.stack.pop().expect("agent is on the stack");
        let _ = self.episodic.write(EpisodicRecord {
            agent: agent.to_string(),
            session: self.id.clone(),
            decision: json!({ "failed": failed, "summary": text }),
            outcome: if failed { "error".into() } else { "report".into() },
        });
        match frame.parent {
            None => {
                self.push_message(MessageKind::Report, agent, "user", &text, Some(text.clone()), None);
                let mut ev = NewEvent::new(
                    agent,
                    EventKind::System,
                    if failed { "session failed" } else { "final response" },
                    text.clone(),
                );
                ev.target = Some("user".into());
                ev.raw = Some(raw);
                self.record(ev);
                self.final_response = Some(text);
                self.state = if failed { SessionState::Failed } else { SessionState::Done };
            }
            Some(parent) => {
                let kind = if failed { MessageKind::Error } else { MessageKind::Report };
                self.push_message(kind, agent, &parent, &text, Some(text.clone()), frame.exchange);
                let mut ev = NewEvent::new(agent, EventKind::Reporting, if failed { "error" } else { "report" }, text);
                ev.target = Some(parent);
                ev.exchange = frame.exchange;
                ev.raw = Some(raw);
                self.record(ev);
                if self.hierarchy.get(agent).is_some_and(|a| a.forgetful) {
                    self.conversations.remove(agent);
                    self.usage.end_episode(agent);
                }
            }
        }
    }

    /// JSON snapshot for status endpoints.
    pub fn status(&self) -> Value {
        json!({
            "id": self.id,
            "state": self.state,
            "steps": self.steps,
            "stack": self.stack.iter().map(|f| f.agent.clone()).collect::<Vec<_>>(),
            "pending": self.pending.as_ref().map(|p| json!({"agent": p.agent, "decision": p.decision})),
            "breakpoints": self.breakpoints,
            "final_response": self.final_response,
            "counters": self.trace.counters(),
            "notices": self.notices,
        })
    }
}

fn raw_of(e: &crate::reasoning::BackendError) -> Option<String> {
    match e {
        crate::reasoning::BackendError::Parse { raw, .. } => Some(raw.clone()),
        _ => None,
    }
}
