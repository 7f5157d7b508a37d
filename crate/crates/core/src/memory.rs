//! Shared and long-term memory: the session's global log, tag-indexed
//! semantic entries, the episodic store (off by default) and directory
//! grounding.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub const DEFAULT_LAST_K: usize = 50;
pub const DEFAULT_GROUNDING_DEPTH: usize = 4;
pub const DEFAULT_GROUNDING_MAX_ENTRIES: usize = 500;
pub const SHARED_OWNER: &str = "shared";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("{path}: {message}")]
    Storage { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

fn storage(path: &Path, e: impl std::fmt::Display) -> MemoryError {
    MemoryError::Storage {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// One line of the global memory file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalEntry {
    pub seq: u64,
    pub author: String,
    pub ts: String,
    pub text: String,
}

/// Append-only session log shared by all agents, one JSON record per line.
#[derive(Debug, Clone, Default)]
pub struct GlobalMemory {
    path: Option<PathBuf>,
    entries: Vec<GlobalEntry>,
}

impl GlobalMemory {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates on first append) the file at `path`, loading any
    /// entries already there.
    pub fn open(path: &Path) -> Result<Self, MemoryError> {
        let mut entries = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| storage(path, e))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let entry: GlobalEntry = serde_json::from_str(line).map_err(|e| MemoryError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.push(entry);
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn append(&mut self, author: &str, text: &str, ts: &str) -> Result<&GlobalEntry, MemoryError> {
        let entry = GlobalEntry {
            seq: self.entries.last().map_or(1, |e| e.seq + 1),
            author: author.to_string(),
            ts: ts.to_string(),
            text: text.to_string(),
        };
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&entry).map_err(|e| storage(path, e))?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| storage(path, e))?;
            writeln!(f, "{line}").map_err(|e| storage(path, e))?;
            f.flush().map_err(|e| storage(path, e))?;
        }
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn entries(&self) -> &[GlobalEntry] {
        &self.entries
    }

    pub fn last_k(&self, k: usize) -> &[GlobalEntry] {
        &self.entries[self.entries.len().saturating_sub(k)..]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticEntry {
    pub tags: Vec<String>,
    /// Agent id, or `shared`.
    #[serde(default = "shared")]
    pub owner: String,
    pub text: String,
}

fn shared() -> String {
    SHARED_OWNER.to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticMemory {
    pub entries: Vec<SemanticEntry>,
}

impl SemanticMemory {
    pub fn new(entries: Vec<SemanticEntry>) -> Self {
        Self { entries }
    }

    /// Entries sharing a tag with `tags`, owned by `agent` or shared, in
    /// store order.
    pub fn retrieve(&self, agent: &str, tags: &[String]) -> Vec<&SemanticEntry> {
        self.entries
            .iter()
            .filter(|e| e.owner == agent || e.owner == SHARED_OWNER)
            .filter(|e| e.tags.iter().any(|t| tags.contains(t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicRecord {
    pub agent: String,
    pub session: String,
    pub decision: serde_json::Value,
    pub outcome: String,
}

/// Present but disabled by default: writes then succeed without storing.
#[derive(Debug, Clone, Default)]
pub struct EpisodicStore {
    pub enabled: bool,
    records: Vec<EpisodicRecord>,
}

impl EpisodicStore {
    pub fn write(&mut self, record: EpisodicRecord) -> Result<(), MemoryError> {
        if self.enabled {
            self.records.push(record);
        }
        Ok(())
    }

    pub fn records(&self) -> &[EpisodicRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    File,
    Dir,
    Unreadable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingEntry {
    /// Relative to the snapshot root, `/`-separated.
    pub path: String,
    pub kind: EntryKind,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingSnapshot {
    pub root: String,
    pub depth_limit: usize,
    pub entries: Vec<GroundingEntry>,
    /// More entries existed than the cap allowed.
    pub truncated: bool,
    /// False when the root itself could not be read.
    pub available: bool,
}

impl GroundingSnapshot {
    /// Plain listing used in rendered contexts. The root path is left out
    /// so the text does not depend on where the session lives.
    pub fn render(&self) -> String {
        if !self.available {
            return "(working directory unavailable)\n".into();
        }
        let mut out = String::new();
        for e in &self.entries {
            let _ = match e.kind {
                EntryKind::Dir => writeln!(out, "{}/", e.path),
                EntryKind::File => writeln!(out, "{} ({} B)", e.path, e.size),
                EntryKind::Unreadable => writeln!(out, "{}/ (unreadable)", e.path),
            };
        }
        if self.truncated {
            out.push_str("...\n");
        }
        out
    }
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Sorted listing of `root` down to `depth_limit` levels, at most
/// `max_entries` long. Unreadable subdirectories are flagged, not fatal.
pub fn snapshot_grounding(root: &Path, depth_limit: usize, max_entries: usize) -> GroundingSnapshot {
    let mut snap = GroundingSnapshot {
        root: root.display().to_string(),
        depth_limit,
        entries: Vec::new(),
        truncated: false,
        available: std::fs::read_dir(root).is_ok(),
    };
    if !snap.available || depth_limit == 0 {
        return snap;
    }
    for item in WalkDir::new(root).min_depth(1).max_depth(depth_limit) {
        match item {
            Ok(e) => {
                let meta = e.metadata().ok();
                let is_dir = e.file_type().is_dir();
                snap.entries.push(GroundingEntry {
                    path: rel(root, e.path()),
                    kind: if is_dir { EntryKind::Dir } else { EntryKind::File },
                    size: if is_dir { 0 } else { meta.map_or(0, |m| m.len()) },
                });
            }
            Err(err) => {
                if let Some(p) = err.path() {
                    let path = rel(root, p);
                    snap.entries.retain(|x| x.path != path);
                    snap.entries.push(GroundingEntry {
                        path,
                        kind: EntryKind::Unreadable,
                        size: 0,
                    });
                }
            }
        }
    }
    snap.entries.sort_by(|a, b| a.path.cmp(&b.path));
    snap.entries.dedup_by(|a, b| a.path == b.path);
    if snap.entries.len() > max_entries {
        snap.entries.truncate(max_entries);
        snap.truncated = true;
    }
    snap
}
