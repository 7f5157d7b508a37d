//! Append-only action trace, counters, and export as notebook or log.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::memory::GlobalEntry;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const PAYLOAD_DIR: &str = "payloads";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Commanding,
    Reporting,
    Acting,
    User,
    System,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Commanding => "commanding",
            EventKind::Reporting => "reporting",
            EventKind::Acting => "acting",
            EventKind::User => "user",
            EventKind::System => "system",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "commanding" => EventKind::Commanding,
            "reporting" => EventKind::Reporting,
            "acting" => EventKind::Acting,
            "user" => EventKind::User,
            "system" => EventKind::System,
            other => return Err(format!("unknown event kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: Map<String, Value>,
}

impl ToolCall {
    /// `tool(arg=value, ...)` with JSON literal values.
    pub fn expression(&self) -> String {
        let args: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.tool, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub seq: u64,
    pub ts: String,
    pub agent: String,
    pub kind: EventKind,
    pub title: String,
    pub summary: String,
    /// Child agent, parent agent or tool the event is directed at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call: Option<ToolCall>,
    /// Full payload on disk, relative to the trace directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_ref: Option<String>,
    /// Backend reply that produced the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

/// Everything about an event except the parts the trace assigns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewEvent {
    pub agent: String,
    pub kind: Option<EventKind>,
    pub title: String,
    pub summary: String,
    pub target: Option<String>,
    pub exchange: Option<u64>,
    pub call: Option<ToolCall>,
    pub payload: Option<String>,
    pub raw: Option<String>,
}

impl NewEvent {
    pub fn new(agent: &str, kind: EventKind, title: impl Into<String>, summary: impl Into<String>) -> Self {
        Self {
            agent: agent.to_string(),
            kind: Some(kind),
            title: title.into(),
            summary: summary.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace storage: {0}")]
    Storage(String),
    #[error("trace has no events")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub commanding: u64,
    pub reporting: u64,
    pub acting: u64,
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.commanding + self.reporting + self.acting
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    #[serde(default)]
    pub agent: Option<String>,
    #[serde(default)]
    pub kind: Option<EventKind>,
}

impl EventFilter {
    pub fn matches(&self, e: &ActionEvent) -> bool {
        self.agent.as_deref().is_none_or(|a| a == e.agent) && self.kind.is_none_or(|k| k == e.kind)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    dir: Option<PathBuf>,
    events: Vec<ActionEvent>,
}

fn storage(e: impl std::fmt::Display) -> TraceError {
    TraceError::Storage(e.to_string())
}

impl Trace {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Trace persisted under `dir`, reloading events already recorded there.
    pub fn open(dir: &Path) -> Result<Self, TraceError> {
        let path = dir.join(TRACE_FILE);
        let mut events = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(storage)?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                events.push(serde_json::from_str(line).map_err(storage)?);
            }
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            events,
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Appends and, when file-backed, writes the event (and its payload)
    /// before returning.
    pub fn record(&mut self, ev: NewEvent, ts: &str) -> Result<&ActionEvent, TraceError> {
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        let mut payload_ref = None;
        if let (Some(dir), Some(payload)) = (&self.dir, &ev.payload) {
            let rel = format!("{PAYLOAD_DIR}/{seq:06}.txt");
            std::fs::create_dir_all(dir.join(PAYLOAD_DIR)).map_err(storage)?;
            std::fs::write(dir.join(&rel), payload).map_err(storage)?;
            payload_ref = Some(rel);
        }
        let event = ActionEvent {
            seq,
            ts: ts.to_string(),
            agent: ev.agent,
            kind: ev.kind.unwrap_or(EventKind::System),
            title: ev.title,
            summary: ev.summary,
            target: ev.target,
            exchange: ev.exchange,
            call: ev.call,
            payload_ref,
            raw: ev.raw,
        };
        if let Some(dir) = &self.dir {
            let line = serde_json::to_string(&event).map_err(storage)?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(TRACE_FILE))
                .map_err(storage)?;
            writeln!(f, "{line}").map_err(storage)?;
            f.flush().map_err(storage)?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn events(&self) -> &[ActionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with seq greater than `after` that pass `filter`.
    pub fn after(&self, after: u64, filter: &EventFilter) -> Vec<&ActionEvent> {
        self.events
            .iter()
            .filter(|e| e.seq > after && filter.matches(e))
            .collect()
    }

    pub fn counters(&self) -> Counters {
        counters(&self.events)
    }
}

pub fn counters(events: &[ActionEvent]) -> Counters {
    let mut c = Counters::default();
    for e in events {
        match e.kind {
            EventKind::Commanding => c.commanding += 1,
            EventKind::Reporting => c.reporting += 1,
            EventKind::Acting => c.acting += 1,
            EventKind::User | EventKind::System => {}
        }
    }
    c
}

/// JSON lines with timestamps blanked, for comparing runs.
pub fn canonical(events: &[ActionEvent]) -> String {
    events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.ts.clear();
            serde_json::to_string(&e).expect("events serialize") + "\n"
        })
        .collect()
}

pub const NOTEBOOK_PREAMBLE: &str = "Replay of an agent session. Markdown cells are delegations \
(commanding) and summaries sent back up (reporting). Each code cell is one tool call written as \
`tool_name(arg=value, ...)` with JSON literal values; bind every name to the registered tool of \
the same name to replay the calls in order.";

fn source(text: &str) -> Value {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    json!(lines)
}

/// Notebook (format 4.5): one markdown cell per commanding/reporting event
/// and one code cell per acting event. The binding notes live in the
/// notebook metadata.
pub fn export_notebook(events: &[ActionEvent]) -> Result<Value, TraceError> {
    if events.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut cells = Vec::new();
    for e in events {
        let id = format!("event-{}", e.seq);
        let meta = json!({"seq": e.seq, "agent": e.agent, "kind": e.kind});
        match e.kind {
            EventKind::Commanding | EventKind::Reporting => {
                let arrow = match (&e.target, e.kind) {
                    (Some(t), _) => format!("{} → {t}", e.agent),
                    (None, _) => e.agent.clone(),
                };
                let text = format!("**{}** ({arrow})\n\n{}", e.title, e.summary);
                cells.push(json!({"cell_type": "markdown", "id": id, "metadata": meta, "source": source(&text)}));
            }
            EventKind::Acting => {
                let expr = match &e.call {
                    Some(call) => call.expression(),
                    None => format!("{}()", e.title),
                };
                cells.push(json!({
                    "cell_type": "code",
                    "id": id,
                    "metadata": meta,
                    "execution_count": null,
                    "outputs": [],
                    "source": source(&expr),
                }));
            }
            EventKind::User | EventKind::System => {}
        }
    }
    Ok(json!({
        "nbformat": 4,
        "nbformat_minor": 5,
        "metadata": {
            "language_info": {"name": "tool-calls"},
            "qflow": {"preamble": NOTEBOOK_PREAMBLE, "events": events.len()},
        },
        "cells": cells,
    }))
}

/// One global-memory-shaped line per event.
pub fn export_log(events: &[ActionEvent]) -> String {
    events
        .iter()
        .map(|e| {
            let entry = GlobalEntry {
                seq: e.seq,
                author: e.agent.clone(),
                ts: e.ts.clone(),
                text: format!("[{}] {}: {}", e.kind.as_str(), e.title, e.summary),
            };
            serde_json::to_string(&entry).expect("entries serialize") + "\n"
        })
        .collect()
}
