//! Typed tools, their parameter schemas and the per-agent action space.

mod builtin;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::clock::Clock;
use crate::exec::ExecBackend;
use crate::memory::GlobalMemory;
use crate::orca::KeywordCatalog;
use crate::recovery::RecoveryOptions;
use crate::thermo::Constants;
use crate::util::truncate_chars;

pub use builtin::register_builtins;

pub const DEFAULT_SUMMARY_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
}

impl ParamType {
    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamType::String => v.is_string(),
            ParamType::Integer => v.is_i64() || v.is_u64(),
            ParamType::Number => v.is_number(),
            ParamType::Boolean => v.is_boolean(),
            ParamType::Array => v.is_array(),
            ParamType::Object => v.is_object(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
}

impl Param {
    pub fn required(name: &str, ty: ParamType, description: &str) -> Self {
        Self {
            name: name.into(),
            ty,
            required: true,
            description: description.into(),
        }
    }

    pub fn optional(name: &str, ty: ParamType, description: &str) -> Self {
        Self {
            required: false,
            ..Self::required(name, ty, description)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub params: Vec<Param>,
    /// Non-reentrant tools are run one at a time per session.
    pub reentrant: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub payload: Value,
    pub summary: String,
    /// Paths written, relative to the session workdir.
    pub artifacts: Vec<String>,
    /// Out-of-band remarks (e.g. a batch fallback) worth keeping in the trace.
    pub notes: Vec<String>,
    /// A recovery loop gave up.
    pub exhausted: bool,
}

impl ToolResult {
    pub fn success(summary: impl Into<String>, payload: Value) -> Self {
        Self {
            ok: true,
            payload,
            summary: summary.into(),
            ..Default::default()
        }
    }

    pub fn failure(diagnostic: impl Into<String>) -> Self {
        let d = diagnostic.into();
        Self {
            ok: false,
            payload: json!({ "error": d }),
            summary: d,
            ..Default::default()
        }
    }
}

/// What a handler may touch.
pub struct ToolContext<'a> {
    pub workdir: &'a Path,
    pub agent: &'a str,
    pub exec: &'a mut dyn ExecBackend,
    pub catalog: &'a KeywordCatalog,
    pub constants: &'a Constants,
    pub recovery: RecoveryOptions,
    pub node_cores: u32,
    pub global: &'a mut GlobalMemory,
    pub clock: &'a Clock,
}

pub type Handler =
    Arc<dyn Fn(&mut ToolContext<'_>, &Map<String, Value>) -> Result<ToolResult, String> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("tool {0:?} is already registered")]
    Duplicate(String),
    #[error("unknown tool {0:?}")]
    Unknown(String),
    #[error("action-space violation: {agent} cannot call {name}")]
    ActionSpace { agent: String, name: String },
    #[error("invalid arguments for {tool}: {message}")]
    Schema { tool: String, message: String },
}

#[derive(Clone)]
struct Tool {
    spec: ToolSpec,
    handler: Handler,
}

#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Tool>,
    summary_cap: Option<usize>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        register_builtins(&mut r).expect("builtin names are unique");
        r
    }

    pub fn set_summary_cap(&mut self, cap: usize) {
        self.summary_cap = Some(cap);
    }

    pub fn summary_cap(&self) -> usize {
        self.summary_cap.unwrap_or(DEFAULT_SUMMARY_CAP)
    }

    pub fn register(&mut self, spec: ToolSpec, handler: Handler) -> Result<(), ToolError> {
        if self.tools.contains_key(&spec.name) {
            return Err(ToolError::Duplicate(spec.name));
        }
        self.tools.insert(spec.name.clone(), Tool { spec, handler });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name).map(|t| &t.spec)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    /// Looks `name` up within one agent's callable modules.
    pub fn resolve(&self, agent: &str, callable: &[String], name: &str) -> Result<&ToolSpec, ToolError> {
        let spec = self.get(name).ok_or_else(|| ToolError::Unknown(name.to_string()))?;
        if !callable.iter().any(|c| c == name) {
            return Err(ToolError::ActionSpace {
                agent: agent.to_string(),
                name: name.to_string(),
            });
        }
        Ok(spec)
    }

    pub fn validate(&self, name: &str, args: &Map<String, Value>) -> Result<(), ToolError> {
        let spec = self.get(name).ok_or_else(|| ToolError::Unknown(name.to_string()))?;
        let bad = |message: String| ToolError::Schema {
            tool: name.to_string(),
            message,
        };
        for p in &spec.params {
            match args.get(&p.name) {
                None | Some(Value::Null) if p.required => {
                    return Err(bad(format!("missing required parameter {:?}", p.name)))
                }
                Some(v) if !v.is_null() && !p.ty.accepts(v) => {
                    return Err(bad(format!("parameter {:?} must be {:?}", p.name, p.ty)))
                }
                _ => {}
            }
        }
        if let Some(extra) = args.keys().find(|k| !spec.params.iter().any(|p| &p.name == *k)) {
            return Err(bad(format!("unexpected parameter {extra:?}")));
        }
        Ok(())
    }

    /// Validates and runs a tool. A failing handler yields `ok = false`
    /// with its diagnostic; summaries are capped.
    pub fn invoke(
        &self,
        ctx: &mut ToolContext<'_>,
        name: &str,
        args: &Map<String, Value>,
    ) -> Result<ToolResult, ToolError> {
        self.validate(name, args)?;
        let tool = &self.tools[name];
        let mut result = match (tool.handler)(ctx, args) {
            Ok(r) => r,
            Err(diagnostic) => ToolResult::failure(format!("{name} failed: {diagnostic}")),
        };
        if result.summary.trim().is_empty() {
            result.summary = if result.ok {
                format!("{name} completed")
            } else {
                format!("{name} failed")
            };
        }
        result.summary = truncate_chars(&result.summary, self.summary_cap());
        Ok(result)
    }

    /// Structured catalog of every registered tool.
    pub fn catalog(&self) -> Value {
        Value::Array(
            self.tools
                .values()
                .map(|t| serde_json::to_value(&t.spec).expect("specs serialize"))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests;
