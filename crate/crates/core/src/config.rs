//! Session configuration documents (TOML) and the session builder.
//!
//! Relative paths in a config are resolved against the config file's
//! directory. `QFLOW_EXEC_BACKEND` overrides `[exec] kind`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentSpec, Hierarchy, Limits, Session, SessionParts};
use crate::clock::Clock;
use crate::exec::{ExecBackend, FixtureMap, MockEngine, ShellBackend, ShellTemplates};
use crate::memory::{GlobalMemory, SemanticEntry, SemanticMemory};
use crate::orca::KeywordCatalog;
use crate::reasoning::{LiveBackend, ReasoningBackend, ScriptedPolicy};
use crate::recovery::RecoveryOptions;
use crate::thermo::Constants;
use crate::tools::ToolRegistry;
use crate::trace::Trace;

pub const EXEC_ENV: &str = "QFLOW_EXEC_BACKEND";
pub const WORK_DIR: &str = "work";
pub const GLOBAL_MEMORY_FILE: &str = "global_memory.jsonl";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

impl ConfigError {
    fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    /// Task used when none is given on the command line.
    pub task: Option<String>,
    pub root: String,
    /// Directory copied into a fresh workdir.
    pub seed: Option<PathBuf>,
    /// Timestamp used for every event; absent means wall clock.
    pub fixed_clock: Option<String>,
    pub episodic: bool,
    /// Serve raw backend replies through the API.
    pub expose_raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Scripted {
        rules: PathBuf,
    },
    Live {
        url: Option<String>,
        /// Environment variable holding the API key.
        key_env: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecKind {
    Mock,
    Shell,
}

impl std::str::FromStr for ExecKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(ExecKind::Mock),
            "shell" | "slurm" => Ok(ExecKind::Shell),
            other => Err(ConfigError::Invalid(format!("unknown exec backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecSection {
    pub kind: ExecKind,
    /// Fixture map file, or a directory of `.inp`/`.out` pairs.
    pub fixtures: Option<PathBuf>,
    pub fail_batch_after: Option<usize>,
    pub shell: Option<ShellTemplates>,
}

impl Default for ExecSection {
    fn default() -> Self {
        Self {
            kind: ExecKind::Mock,
            fixtures: None,
            fail_batch_after: None,
            shell: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(flatten)]
    pub spec: AgentSpec,
    /// Context document read from a file instead of inline text.
    pub context_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub limits: Limits,
    pub backend: BackendConfig,
    /// Extra backends keyed by model binding.
    #[serde(default)]
    pub bindings: BTreeMap<String, BackendConfig>,
    #[serde(default)]
    pub exec: ExecSection,
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub recovery: RecoveryOptions,
    #[serde(default)]
    pub constants: Constants,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub semantic: Vec<SemanticEntry>,
    #[serde(skip)]
    pub base: PathBuf,
}

/// Per-run choices made outside the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub id: String,
    pub task: Option<String>,
    /// Holds the workdir, trace and global memory.
    pub session_root: PathBuf,
    /// Overrides `[backend]` for every binding: `scripted` or `live`.
    pub backend: Option<String>,
    /// Overrides `[exec] kind` and the environment.
    pub exec: Option<ExecKind>,
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.base = base.to_path_buf();
        if cfg.session.root.is_empty() {
            cfg.session.root = cfg
                .agents
                .first()
                .map(|a| a.spec.id.clone())
                .ok_or_else(|| ConfigError::Invalid("no agents declared".into()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::read(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn tools(&self) -> ToolRegistry {
        let mut t = ToolRegistry::with_builtins();
        t.set_summary_cap(self.limits.summary_cap);
        t
    }

    /// Agent specs with context files read in.
    pub fn agent_specs(&self) -> Result<Vec<AgentSpec>, ConfigError> {
        self.agents
            .iter()
            .map(|a| {
                let mut spec = a.spec.clone();
                if let Some(f) = &a.context_file {
                    let p = self.resolve(f);
                    spec.context_doc = std::fs::read_to_string(&p).map_err(|e| ConfigError::read(&p, e))?;
                }
                Ok(spec)
            })
            .collect()
    }

    pub fn hierarchy(&self) -> Result<Hierarchy, ConfigError> {
        Hierarchy::with_limit(self.agent_specs()?, &self.session.root, &self.tools(), self.limits.max_depth)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn catalog(&self) -> Result<KeywordCatalog, ConfigError> {
        match &self.catalog {
            None => Ok(KeywordCatalog::default()),
            Some(p) => {
                let p = self.resolve(p);
                let text = std::fs::read_to_string(&p).map_err(|e| ConfigError::read(&p, e))?;
                KeywordCatalog::parse(&text).map_err(|e| ConfigError::read(&p, e))
            }
        }
    }

    fn backend(&self, cfg: &BackendConfig, force: Option<&str>) -> Result<Box<dyn ReasoningBackend>, ConfigError> {
        let cfg = match (force, cfg) {
            (None, c) => c.clone(),
            (Some("scripted"), c @ BackendConfig::Scripted { .. }) => c.clone(),
            (Some("scripted"), _) => match &self.backend {
                c @ BackendConfig::Scripted { .. } => c.clone(),
                _ => return Err(ConfigError::Invalid("no scripted rules configured".into())),
            },
            (Some("live"), c @ BackendConfig::Live { .. }) => c.clone(),
            (Some("live"), _) => BackendConfig::Live { url: None, key_env: None },
            (Some(other), _) => return Err(ConfigError::Invalid(format!("unknown backend {other:?}"))),
        };
        match cfg {
            BackendConfig::Scripted { rules } => {
                let p = self.resolve(&rules);
                Ok(Box::new(ScriptedPolicy::load(&p).map_err(|e| ConfigError::Invalid(e.to_string()))?))
            }
            BackendConfig::Live { url, key_env } => {
                let live = match url {
                    Some(u) => LiveBackend::new(&u, key_env.and_then(|k| std::env::var(k).ok())),
                    None => LiveBackend::from_env().map_err(|e| ConfigError::Invalid(e.to_string()))?,
                };
                Ok(Box::new(live))
            }
        }
    }

    pub fn exec_kind(&self, force: Option<ExecKind>) -> Result<ExecKind, ConfigError> {
        if let Some(k) = force {
            return Ok(k);
        }
        match std::env::var(EXEC_ENV) {
            Ok(v) if !v.trim().is_empty() => v.parse(),
            _ => Ok(self.exec.kind),
        }
    }

    pub fn exec_backend(&self, force: Option<ExecKind>) -> Result<Box<dyn ExecBackend>, ConfigError> {
        match self.exec_kind(force)? {
            ExecKind::Mock => {
                let fixtures = match &self.exec.fixtures {
                    None => FixtureMap::default(),
                    Some(p) => {
                        let p = self.resolve(p);
                        let map = if p.is_dir() {
                            FixtureMap::from_directory(&p)
                        } else {
                            FixtureMap::load(&p)
                        };
                        map.map_err(|e| ConfigError::read(&p, e))?
                    }
                };
                let mut engine = MockEngine::new(fixtures);
                engine.fail_batch_after = self.exec.fail_batch_after;
                Ok(Box::new(engine))
            }
            ExecKind::Shell => {
                let t = self.exec.shell.clone().unwrap_or_default();
                Ok(Box::new(ShellBackend::new(t).map_err(|e| ConfigError::Invalid(e.to_string()))?))
            }
        }
    }

    pub fn clock(&self) -> Clock {
        match &self.session.fixed_clock {
            Some(ts) => Clock::Fixed(ts.clone()),
            None => Clock::System,
        }
    }

    /// Builds and starts a session under `opts.session_root`, seeding the
    /// workdir on first use.
    pub fn build(&self, opts: &RunOptions) -> Result<Session, ConfigError> {
        self.build_with(opts, self.exec_backend(opts.exec)?)
    }

    /// Like [`Config::build`] with a caller-supplied execution backend.
    pub fn build_with(&self, opts: &RunOptions, exec: Box<dyn ExecBackend>) -> Result<Session, ConfigError> {
        let hierarchy = self.hierarchy()?;
        let task = opts
            .task
            .clone()
            .or_else(|| self.session.task.clone())
            .ok_or_else(|| ConfigError::Invalid("no task given and none configured".into()))?;
        let root = &opts.session_root;
        let workdir = root.join(WORK_DIR);
        let fresh = !workdir.exists();
        std::fs::create_dir_all(&workdir).map_err(|e| ConfigError::read(&workdir, e))?;
        if let (true, Some(seed)) = (fresh, &self.session.seed) {
            copy_tree(&self.resolve(seed), &workdir)?;
        }

        let mut backends = BTreeMap::new();
        backends.insert("default".to_string(), self.backend(&self.backend, opts.backend.as_deref())?);
        for (name, b) in &self.bindings {
            backends.insert(name.clone(), self.backend(b, opts.backend.as_deref())?);
        }
        let parts = SessionParts {
            id: opts.id.clone(),
            task,
            workdir,
            hierarchy,
            tools: self.tools(),
            backends,
            exec,
            catalog: self.catalog()?,
            constants: self.constants,
            recovery: self.recovery,
            semantic: SemanticMemory::new(self.semantic.clone()),
            global: GlobalMemory::open(&root.join(GLOBAL_MEMORY_FILE)).map_err(|e| ConfigError::read(root, e))?,
            trace: Trace::open(root).map_err(|e| ConfigError::read(root, e))?,
            clock: self.clock(),
            limits: self.limits,
        };
        let mut session = Session::start(parts).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        session.enable_episodic(self.session.episodic);
        Ok(session)
    }
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), ConfigError> {
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| ConfigError::read(from, e))?;
        let rel = entry.path().strip_prefix(from).expect("walk stays under root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| ConfigError::read(&dest, e))?;
        } else {
            std::fs::copy(entry.path(), &dest).map_err(|e| ConfigError::read(entry.path(), e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
[session]
task = "say hi"
fixed_clock = "t0"

[limits]
max_steps = 10

[backend]
kind = "scripted"
rules = "rules.toml"

[[agents]]
id = "root"
role_text = "answers"
callable_modules = ["read_file_content"]
"#;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_config_builds_and_runs() {
        let d = tempfile::tempdir().unwrap();
        write(
            d.path(),
            "rules.toml",
            "[[rule]]\nagent = \"root\"\ndecision = { action = \"respond\", summary = \"hi\" }\n",
        );
        let cfg = Config::load(&write(d.path(), "c.toml", MIN)).unwrap();
        assert_eq!(cfg.session.root, "root");
        assert_eq!(cfg.limits.max_steps, 10);
        assert_eq!(cfg.limits.summary_cap, 2000);
        let opts = RunOptions {
            id: "a".into(),
            session_root: d.path().join("s"),
            exec: Some(ExecKind::Mock),
            ..Default::default()
        };
        let mut s = cfg.build(&opts).unwrap();
        assert_eq!(s.run().final_response.as_deref(), Some("hi"));
        assert!(d.path().join("s/trace.jsonl").exists());
        assert!(d.path().join("s/work").is_dir());
    }

    #[test]
    fn config_errors() {
        let d = tempfile::tempdir().unwrap();
        assert!(Config::load(&d.path().join("missing.toml")).is_err());
        let bad = MIN.replace("read_file_content", "no_such_tool");
        let cfg = Config::parse(&bad, d.path()).unwrap();
        assert!(cfg.hierarchy().is_err());
        assert!(Config::parse(&format!("{MIN}\nbogus = 1\n"), d.path()).is_err());
        let cfg = Config::parse(MIN, d.path()).unwrap();
        let opts = RunOptions {
            session_root: d.path().join("s"),
            exec: Some(ExecKind::Mock),
            ..Default::default()
        };
        // rules file is missing
        assert!(cfg.build(&opts).is_err());
        assert!("slurm".parse::<ExecKind>().is_ok());
        assert!("nope".parse::<ExecKind>().is_err());
    }
}
