//! Job execution: core allocation, batch submission with serial fallback,
//! polling and output collection.

mod func;
mod mock;
mod shell;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use func::FnEngine;
pub use mock::{normalize_input, input_hash, FixtureMap, MockEngine};
pub use shell::{ShellBackend, ShellTemplates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solvation {
    Gas,
    Implicit,
    ExplicitCluster,
}

const TIERS: [u32; 3] = [8, 16, 24];

/// Cores for one job: 8/16/24 by solvation model, one tier up above 60
/// atoms, clamped to `[1, min(24, node_cores)]`.
pub fn allocate_cores(atom_count: usize, solvation: Solvation, node_cores: u32) -> u32 {
    let mut tier = match solvation {
        Solvation::Gas => 0,
        Solvation::Implicit => 1,
        Solvation::ExplicitCluster => 2,
    };
    if atom_count > 60 {
        tier = (tier + 1).min(TIERS.len() - 1);
    }
    TIERS[tier].clamp(1, node_cores.clamp(1, 24))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub name: String,
    pub workdir: PathBuf,
    pub input: String,
    pub cores: u32,
    #[serde(default)]
    pub expected_outputs: Vec<String>,
}

impl JobRequest {
    pub fn input_path(&self) -> PathBuf {
        self.workdir.join(format!("{}.inp", self.name))
    }

    pub fn output_path(&self) -> PathBuf {
        self.workdir.join(format!("{}.out", self.name))
    }

    /// Writes the input file into the job's working directory.
    pub fn stage(&self) -> Result<(), ExecError> {
        if self.cores == 0 {
            return Err(ExecError::Invalid(format!("{}: cores must be at least 1", self.name)));
        }
        std::fs::create_dir_all(&self.workdir).map_err(|e| ExecError::io(&self.workdir, e))?;
        std::fs::write(self.input_path(), &self.input).map_err(|e| ExecError::io(&self.input_path(), e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobHandle {
    pub backend_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "detail", rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed(String),
}

impl JobStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("unknown job handle {0}")]
    UnknownHandle(String),
    #[error("job {0} has not finished")]
    NotFinished(String),
    #[error("invalid job: {0}")]
    Invalid(String),
    #[error("submission failed: {0}")]
    Submit(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ExecError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        ExecError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// A batch submission that broke part-way.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    /// Outcomes for the jobs handled before the failure.
    pub submitted: Vec<Result<JobHandle, ExecError>>,
    pub reason: String,
}

pub trait ExecBackend: Send {
    fn kind(&self) -> &'static str;

    fn submit(&mut self, job: &JobRequest) -> Result<JobHandle, ExecError>;

    /// Submits all jobs at once. The default submits them one by one and
    /// never reports a batch-level failure.
    fn submit_all(&mut self, jobs: &[JobRequest]) -> Result<Vec<Result<JobHandle, ExecError>>, BatchFailure> {
        Ok(jobs.iter().map(|j| self.submit(j)).collect())
    }

    fn poll(&mut self, handle: &JobHandle) -> Result<JobStatus, ExecError>;

    fn collect(&mut self, handle: &JobHandle) -> Result<String, ExecError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub handles: Vec<Result<JobHandle, ExecError>>,
    /// Set when the batch broke and the rest went in one at a time.
    pub fallback: Option<String>,
}

pub fn submit_batch(backend: &mut dyn ExecBackend, jobs: &[JobRequest]) -> BatchOutcome {
    if jobs.is_empty() {
        return BatchOutcome {
            handles: Vec::new(),
            fallback: None,
        };
    }
    match backend.submit_all(jobs) {
        Ok(handles) => BatchOutcome {
            handles,
            fallback: None,
        },
        Err(BatchFailure { mut submitted, reason }) => {
            let done = submitted.len();
            tracing::warn!(done, %reason, "batch submission failed, switching to serial");
            for job in &jobs[done..] {
                submitted.push(backend.submit(job));
            }
            BatchOutcome {
                handles: submitted,
                fallback: Some(format!(
                    "batch submission failed after {done} of {} jobs ({reason}); submitted the remaining {} one at a time",
                    jobs.len(),
                    jobs.len() - done
                )),
            }
        }
    }
}

/// Polls until every handle is terminal or `max_polls` rounds pass.
pub fn wait_all(
    backend: &mut dyn ExecBackend,
    handles: &[JobHandle],
    max_polls: usize,
) -> Result<Vec<JobStatus>, ExecError> {
    let mut statuses = vec![JobStatus::Queued; handles.len()];
    for _ in 0..max_polls {
        for (h, s) in handles.iter().zip(statuses.iter_mut()) {
            if !s.is_terminal() {
                *s = backend.poll(h)?;
            }
        }
        if statuses.iter().all(JobStatus::is_terminal) {
            break;
        }
    }
    Ok(statuses)
}

/// Submits one job, waits for it and returns its output text.
pub fn run_job(backend: &mut dyn ExecBackend, job: &JobRequest, max_polls: usize) -> Result<String, ExecError> {
    let handle = backend.submit(job)?;
    match wait_all(backend, std::slice::from_ref(&handle), max_polls)?.remove(0) {
        JobStatus::Done => backend.collect(&handle),
        JobStatus::Failed(why) => Err(ExecError::Submit(format!("{}: {why}", job.name))),
        _ => Err(ExecError::NotFinished(job.name.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn core_allocation_tiers() {
        assert_eq!(allocate_cores(13, Solvation::Gas, 48), 8);
        assert_eq!(allocate_cores(13, Solvation::Implicit, 48), 16);
        assert_eq!(allocate_cores(49, Solvation::ExplicitCluster, 48), 24);
        assert_eq!(allocate_cores(13, Solvation::Implicit, 4), 4);
        assert_eq!(allocate_cores(61, Solvation::Gas, 48), 16);
        assert_eq!(allocate_cores(61, Solvation::ExplicitCluster, 48), 24);
        assert_eq!(allocate_cores(5, Solvation::Gas, 0), 1);
    }

    proptest! {
        #[test]
        fn allocation_bounds(atoms in 0usize..500, node in 0u32..200, s in 0..3u8) {
            let solv = [Solvation::Gas, Solvation::Implicit, Solvation::ExplicitCluster][s as usize];
            let c = allocate_cores(atoms, solv, node);
            prop_assert!(c >= 1 && c <= 24 && c <= node.max(1));
            prop_assert!(allocate_cores(atoms + 100, solv, node) >= c);
        }
    }
}
