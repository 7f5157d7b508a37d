//! Agent nodes, the callable hierarchy, the message protocol and working
//! memory assembly.

mod session;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{GlobalEntry, GroundingSnapshot, SemanticEntry};
use crate::reasoning::count_tokens;
use crate::tools::ToolRegistry;

pub use session::{
    AgentGraph, Breakpoint, GraphNode, Limits, Session, SessionError, SessionParts, SessionResult,
    SessionState,
};

/// Levels below the root an agent or tool may sit.
pub const MAX_DEPTH: usize = 6;

fn default_binding() -> String {
    "default".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub role_text: String,
    #[serde(default)]
    pub context_doc: String,
    /// Child agents and tools, in the order they are offered.
    #[serde(default)]
    pub callable_modules: Vec<String>,
    #[serde(default)]
    pub semantic_keys: Vec<String>,
    #[serde(default = "default_binding")]
    pub model_binding: String,
    /// Context is dropped after each completed subtask.
    #[serde(default)]
    pub forgetful: bool,
    /// Include the working-directory tree in the context.
    #[serde(default = "yes")]
    pub grounding: bool,
}

impl AgentSpec {
    pub fn new(id: &str, role_text: &str, callable: &[&str]) -> Self {
        Self {
            id: id.into(),
            role_text: role_text.into(),
            context_doc: String::new(),
            callable_modules: callable.iter().map(|c| c.to_string()).collect(),
            semantic_keys: Vec::new(),
            model_binding: default_binding(),
            forgetful: false,
            grounding: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("duplicate agent id {0:?}")]
    Duplicate(String),
    #[error("agent id {0:?} collides with a tool name")]
    ToolCollision(String),
    #[error("root agent {0:?} is not registered")]
    MissingRoot(String),
    #[error("{agent} lists {module:?}, which is neither a registered agent nor a tool")]
    UnknownModule { agent: String, module: String },
    #[error("callable graph has a cycle through {0}")]
    Cycle(String),
    #[error("{node} sits {depth} levels below the root (limit {limit})")]
    TooDeep { node: String, depth: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Agent,
    Tool,
}

/// A validated agent graph. Depth is the longest edge path from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    root: String,
    agents: BTreeMap<String, AgentSpec>,
    order: Vec<String>,
    depth: BTreeMap<String, usize>,
}

impl Hierarchy {
    pub fn new(agents: Vec<AgentSpec>, root: &str, tools: &ToolRegistry) -> Result<Self, HierarchyError> {
        Self::with_limit(agents, root, tools, MAX_DEPTH)
    }

    pub fn with_limit(
        agents: Vec<AgentSpec>,
        root: &str,
        tools: &ToolRegistry,
        limit: usize,
    ) -> Result<Self, HierarchyError> {
        let mut map = BTreeMap::new();
        let mut order = Vec::new();
        for a in agents {
            if tools.contains(&a.id) {
                return Err(HierarchyError::ToolCollision(a.id));
            }
            if map.contains_key(&a.id) {
                return Err(HierarchyError::Duplicate(a.id));
            }
            order.push(a.id.clone());
            map.insert(a.id.clone(), a);
        }
        if !map.contains_key(root) {
            return Err(HierarchyError::MissingRoot(root.to_string()));
        }
        for a in map.values() {
            if let Some(m) = a
                .callable_modules
                .iter()
                .find(|m| !map.contains_key(*m) && !tools.contains(m))
            {
                return Err(HierarchyError::UnknownModule {
                    agent: a.id.clone(),
                    module: m.clone(),
                });
            }
        }

        // longest path from the root, rejecting back edges
        fn visit(
            node: &str,
            d: usize,
            map: &BTreeMap<String, AgentSpec>,
            path: &mut Vec<String>,
            depth: &mut BTreeMap<String, usize>,
            limit: usize,
        ) -> Result<(), HierarchyError> {
            if path.iter().any(|p| p == node) {
                path.push(node.to_string());
                return Err(HierarchyError::Cycle(path.join(" -> ")));
            }
            if d > limit {
                return Err(HierarchyError::TooDeep {
                    node: node.to_string(),
                    depth: d,
                    limit,
                });
            }
            let best = depth.entry(node.to_string()).or_insert(d);
            *best = (*best).max(d);
            if let Some(a) = map.get(node) {
                path.push(node.to_string());
                for child in &a.callable_modules {
                    visit(child, d + 1, map, path, depth, limit)?;
                }
                path.pop();
            }
            Ok(())
        }
        let mut depth = BTreeMap::new();
        visit(root, 0, &map, &mut Vec::new(), &mut depth, limit)?;
        // agents unreachable from the root may still not form cycles
        for id in &order {
            if !depth.contains_key(id) {
                let mut scratch = BTreeMap::new();
                visit(id, 0, &map, &mut Vec::new(), &mut scratch, usize::MAX)?;
            }
        }
        Ok(Self {
            root: root.to_string(),
            agents: map,
            order,
            depth,
        })
    }

    pub fn root(&self) -> &AgentSpec {
        &self.agents[&self.root]
    }

    pub fn get(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.get(id)
    }

    pub fn is_agent(&self, id: &str) -> bool {
        self.agents.contains_key(id)
    }

    /// Agents in declaration order.
    pub fn agents(&self) -> impl Iterator<Item = &AgentSpec> {
        self.order.iter().map(|id| &self.agents[id])
    }

    /// Longest distance from the root; `None` when unreachable.
    pub fn depth(&self, node: &str) -> Option<usize> {
        self.depth.get(node).copied()
    }

    pub fn max_depth(&self) -> usize {
        self.depth.values().copied().max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.agents()
            .flat_map(|a| a.callable_modules.iter().map(|c| (a.id.clone(), c.clone())))
            .collect()
    }

    /// Every node reachable from an agent, agents and tools alike.
    pub fn nodes(&self) -> Vec<(String, NodeKind)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for a in self.agents() {
            if seen.insert(a.id.clone()) {
                out.push((a.id.clone(), NodeKind::Agent));
            }
        }
        for a in self.agents() {
            for c in &a.callable_modules {
                if seen.insert(c.clone()) {
                    out.push((c.clone(), NodeKind::Tool));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    User,
    Command,
    Report,
    ToolCall,
    ToolResult,
    Error,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::User => "user",
            MessageKind::Command => "command",
            MessageKind::Report => "report",
            MessageKind::ToolCall => "tool_call",
            MessageKind::ToolResult => "tool_result",
            MessageKind::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub session_id: String,
    pub kind: MessageKind,
    pub from: String,
    pub to: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub timestamp: String,
    /// Pairs a command with its report or error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkingMemory {
    pub agent: String,
    pub global_excerpt: Vec<GlobalEntry>,
    pub conversation: Vec<Message>,
    /// `None` when the agent runs without grounding.
    pub grounding: Option<GroundingSnapshot>,
    pub retrieved: Vec<SemanticEntry>,
    pub token_estimate: u64,
}

/// One line per callable module: `name (agent|tool): description`.
pub fn describe_callables(agent: &AgentSpec, hierarchy: &Hierarchy, tools: &ToolRegistry) -> Vec<String> {
    agent
        .callable_modules
        .iter()
        .map(|m| match (hierarchy.get(m), tools.get(m)) {
            (Some(a), _) => format!("{m} (agent): {}", a.role_text.lines().next().unwrap_or("")),
            (None, Some(t)) => format!("{m} (tool): {}", t.description),
            _ => format!("{m}"),
        })
        .collect()
}

/// Stable text form of a working memory. Timestamps are left out.
pub fn render_context(agent: &AgentSpec, callables: &[String], wm: &WorkingMemory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Agent: {}\n\n## Role\n{}", agent.id, agent.role_text.trim_end());
    if !agent.context_doc.trim().is_empty() {
        let _ = writeln!(out, "\n## Context\n{}", agent.context_doc.trim_end());
    }
    out.push_str("\n## Callable modules\n");
    for c in callables {
        let _ = writeln!(out, "- {c}");
    }
    if !wm.retrieved.is_empty() {
        out.push_str("\n## Retrieved memory\n");
        for e in &wm.retrieved {
            let _ = writeln!(out, "- [{}] {}", e.tags.join(","), e.text);
        }
    }
    if !wm.global_excerpt.is_empty() {
        out.push_str("\n## Global memory\n");
        for e in &wm.global_excerpt {
            let _ = writeln!(out, "{}. {}: {}", e.seq, e.author, e.text);
        }
    }
    if let Some(g) = &wm.grounding {
        let _ = write!(out, "\n## Working directory\n{}", g.render());
    }
    out.push_str("\n## Conversation\n");
    for m in &wm.conversation {
        let _ = writeln!(out, "[{}] {} -> {}: {}", m.kind.as_str(), m.from, m.to, m.body);
    }
    out
}

pub fn estimate(rendered: &str) -> u64 {
    count_tokens(rendered)
}
