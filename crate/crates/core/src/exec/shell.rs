//! Workload-manager adapter that shells out to configurable commands.
//!
//! Templates substitute `{name}`, `{workdir}`, `{cores}`, `{input}`,
//! `{output}` and, for polling, `{id}`.

use std::path::PathBuf;
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ExecBackend, ExecError, JobHandle, JobRequest, JobStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellTemplates {
    pub submit: String,
    pub poll: String,
    /// First capture group is the job id.
    pub id_pattern: String,
}

impl Default for ShellTemplates {
    fn default() -> Self {
        Self {
            submit: "cd {workdir} && sbatch --parsable --job-name={name} --ntasks={cores} --wrap='orca {input} > {output}' | sed 's/^/Submitted batch job /'".into(),
            poll: "squeue -h -j {id} -o %T".into(),
            id_pattern: r"Submitted batch job (\d+)".into(),
        }
    }
}

#[derive(Debug)]
struct ShellJob {
    handle: JobHandle,
    output: PathBuf,
}

#[derive(Debug)]
pub struct ShellBackend {
    templates: ShellTemplates,
    id_re: Regex,
    jobs: Vec<ShellJob>,
}

fn run(cmd: &str) -> Result<String, ExecError> {
    let out = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .output()
        .map_err(|e| ExecError::Submit(format!("spawning `{cmd}`: {e}")))?;
    if !out.status.success() {
        return Err(ExecError::Submit(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

impl ShellBackend {
    pub fn new(templates: ShellTemplates) -> Result<Self, ExecError> {
        let id_re = Regex::new(&templates.id_pattern)
            .map_err(|e| ExecError::Invalid(format!("id pattern: {e}")))?;
        Ok(Self {
            templates,
            id_re,
            jobs: Vec::new(),
        })
    }

    fn find(&self, handle: &JobHandle) -> Result<&ShellJob, ExecError> {
        self.jobs
            .iter()
            .find(|j| j.handle == *handle)
            .ok_or_else(|| ExecError::UnknownHandle(handle.backend_id.clone()))
    }
}

impl ExecBackend for ShellBackend {
    fn kind(&self) -> &'static str {
        "shell"
    }

    fn submit(&mut self, job: &JobRequest) -> Result<JobHandle, ExecError> {
        job.stage()?;
        let cmd = self
            .templates
            .submit
            .replace("{name}", &job.name)
            .replace("{workdir}", &job.workdir.display().to_string())
            .replace("{cores}", &job.cores.to_string())
            .replace("{input}", &format!("{}.inp", job.name))
            .replace("{output}", &format!("{}.out", job.name));
        let stdout = run(&cmd)?;
        let id = self
            .id_re
            .captures(&stdout)
            .and_then(|c| c.get(1))
            .map(|m| m.as_str().to_string())
            .ok_or_else(|| ExecError::Submit(format!("no job id in submit output {stdout:?}")))?;
        let handle = JobHandle {
            backend_id: id,
            name: job.name.clone(),
        };
        self.jobs.push(ShellJob {
            handle: handle.clone(),
            output: job.output_path(),
        });
        Ok(handle)
    }

    fn poll(&mut self, handle: &JobHandle) -> Result<JobStatus, ExecError> {
        let job = self.find(handle)?;
        let cmd = self.templates.poll.replace("{id}", &handle.backend_id);
        let state = run(&cmd)?.trim().to_ascii_uppercase();
        Ok(match state.as_str() {
            "PENDING" | "CONFIGURING" => JobStatus::Queued,
            "RUNNING" | "COMPLETING" => JobStatus::Running,
            "" | "COMPLETED" if job.output.exists() => JobStatus::Done,
            "" | "COMPLETED" => JobStatus::Failed(format!("{} missing", job.output.display())),
            other => JobStatus::Failed(other.to_string()),
        })
    }

    fn collect(&mut self, handle: &JobHandle) -> Result<String, ExecError> {
        let job = self.find(handle)?;
        std::fs::read_to_string(&job.output).map_err(|e| ExecError::io(&job.output, e))
    }
}
