//! Engine whose outputs come from a function of the job request. Handy for
//! simulated solvers in tests and adversarial fixture chains.

use super::mock::write_outputs;
use super::{ExecBackend, ExecError, JobHandle, JobRequest, JobStatus};

type Responder = Box<dyn FnMut(&JobRequest) -> Result<String, String> + Send>;

pub struct FnEngine {
    respond: Responder,
    outputs: Vec<(JobHandle, Result<String, String>)>,
}

impl std::fmt::Debug for FnEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnEngine").field("jobs", &self.outputs.len()).finish()
    }
}

impl FnEngine {
    pub fn new(respond: impl FnMut(&JobRequest) -> Result<String, String> + Send + 'static) -> Self {
        Self {
            respond: Box::new(respond),
            outputs: Vec::new(),
        }
    }

    fn get(&self, handle: &JobHandle) -> Result<&Result<String, String>, ExecError> {
        self.outputs
            .iter()
            .find(|(h, _)| h == handle)
            .map(|(_, r)| r)
            .ok_or_else(|| ExecError::UnknownHandle(handle.backend_id.clone()))
    }
}

impl ExecBackend for FnEngine {
    fn kind(&self) -> &'static str {
        "fn"
    }

    fn submit(&mut self, job: &JobRequest) -> Result<JobHandle, ExecError> {
        job.stage()?;
        let result = (self.respond)(job);
        if let Ok(text) = &result {
            write_outputs(&job.workdir, &job.name, text)?;
        }
        let handle = JobHandle {
            backend_id: format!("fn-{}", self.outputs.len() + 1),
            name: job.name.clone(),
        };
        self.outputs.push((handle.clone(), result));
        Ok(handle)
    }

    fn poll(&mut self, handle: &JobHandle) -> Result<JobStatus, ExecError> {
        Ok(match self.get(handle)? {
            Ok(_) => JobStatus::Done,
            Err(why) => JobStatus::Failed(why.clone()),
        })
    }

    fn collect(&mut self, handle: &JobHandle) -> Result<String, ExecError> {
        self.get(handle)?.clone().map_err(ExecError::Submit)
    }
}
