//! Fixture-backed engine: maps a normalized input hash to a canned output.
//!
//! Map file lines: `<sha256 hex> <fixture path> [round]`, paths relative to
//! the map file. `round` selects among outputs for repeated submissions of
//! the same input (0-based); lines without it match any round.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{BatchFailure, ExecBackend, ExecError, JobHandle, JobRequest, JobStatus};
use crate::geometry::write_xyz;
use crate::orca::parse_output;

/// Strips `#` comments and trailing whitespace; drops lines left empty.
pub fn normalize_input(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let kept = line.split('#').next().unwrap_or("").trim_end();
        if !kept.is_empty() {
            out.push_str(kept);
            out.push('\n');
        }
    }
    out
}

pub fn input_hash(text: &str) -> String {
    hex::encode(Sha256::digest(normalize_input(text).as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureMap {
    entries: HashMap<(String, Option<u32>), PathBuf>,
}

impl FixtureMap {
    pub fn insert(&mut self, hash: &str, round: Option<u32>, path: PathBuf) {
        self.entries.insert((hash.to_string(), round), path);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, hash: &str, round: u32) -> Option<&Path> {
        self.entries
            .get(&(hash.to_string(), Some(round)))
            .or_else(|| self.entries.get(&(hash.to_string(), None)))
            .map(PathBuf::as_path)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ExecError> {
        let mut map = FixtureMap::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || ExecError::Invalid(format!("fixture map line {}: {line:?}", i + 1));
            let (hash, path, round) = match fields.as_slice() {
                [h, p] => (*h, *p, None),
                [h, p, r] => (*h, *p, Some(r.parse().map_err(|_| bad())?)),
                _ => return Err(bad()),
            };
            if hash.len() != 64 || !hash.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(bad());
            }
            map.insert(hash, round, base.join(path));
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, ExecError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExecError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Indexes every `<stem>.inp` that has a sibling `<stem>.out`.
    pub fn from_directory(root: &Path) -> Result<Self, ExecError> {
        let mut map = FixtureMap::default();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            let entries = std::fs::read_dir(&dir).map_err(|e| ExecError::io(&dir, e))?;
            for entry in entries {
                let path = entry.map_err(|e| ExecError::io(&dir, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.extension().is_some_and(|e| e == "inp") {
                    let out = path.with_extension("out");
                    if out.exists() {
                        let text = std::fs::read_to_string(&path).map_err(|e| ExecError::io(&path, e))?;
                        map.insert(&input_hash(&text), None, out);
                    }
                }
            }
        }
        Ok(map)
    }

    /// Map-file text with paths relative to `base`, sorted for stable diffs.
    pub fn render(&self, base: &Path) -> String {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|((hash, round), path)| {
                let rel = path.strip_prefix(base).unwrap_or(path);
                let rel = rel.to_string_lossy().replace('\\', "/");
                match round {
                    Some(r) => format!("{hash} {rel} {r}"),
                    None => format!("{hash} {rel}"),
                }
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            let _ = writeln!(out, "{l}");
        }
        out
    }
}

/// Writes `<name>.out` and, when the output carries a final geometry,
/// `<name>.xyz` the way the solver leaves it.
pub(super) fn write_outputs(workdir: &Path, name: &str, text: &str) -> Result<(), ExecError> {
    let out = workdir.join(format!("{name}.out"));
    std::fs::write(&out, text).map_err(|e| ExecError::io(&out, e))?;
    if let Some(mol) = parse_output(text).final_geometry {
        let xyz = workdir.join(format!("{name}.xyz"));
        std::fs::write(&xyz, write_xyz(&mol, name)).map_err(|e| ExecError::io(&xyz, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct MockJob {
    handle: JobHandle,
    workdir: PathBuf,
    result: Result<String, String>,
    /// 0 queued, 1 running, 2 finished
    stage: u8,
}

#[derive(Debug, Default)]
pub struct MockEngine {
    fixtures: FixtureMap,
    jobs: Vec<MockJob>,
    rounds: HashMap<String, u32>,
    /// Batch submissions break after this many jobs.
    pub fail_batch_after: Option<usize>,
}

impl MockEngine {
    pub fn new(fixtures: FixtureMap) -> Self {
        Self {
            fixtures,
            ..Self::default()
        }
    }

    pub fn submissions(&self) -> usize {
        self.jobs.len()
    }

    fn job_mut(&mut self, handle: &JobHandle) -> Result<&mut MockJob, ExecError> {
        self.jobs
            .iter_mut()
            .find(|j| j.handle == *handle)
            .ok_or_else(|| ExecError::UnknownHandle(handle.backend_id.clone()))
    }

    fn finish(job: &MockJob) -> Result<(), ExecError> {
        match &job.result {
            Ok(text) => write_outputs(&job.workdir, &job.handle.name, text),
            Err(_) => Ok(()),
        }
    }
}

impl ExecBackend for MockEngine {
    fn kind(&self) -> &'static str {
        "mock"
    }

    fn submit(&mut self, job: &JobRequest) -> Result<JobHandle, ExecError> {
        job.stage()?;
        let hash = input_hash(&job.input);
        let round = self.rounds.entry(hash.clone()).or_insert(0);
        let result = match self.fixtures.lookup(&hash, *round) {
            Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display())),
            None => Err(format!("no fixture for input hash {hash}")),
        };
        *round += 1;
        let handle = JobHandle {
            backend_id: format!("mock-{}", self.jobs.len() + 1),
            name: job.name.clone(),
        };
        self.jobs.push(MockJob {
            handle: handle.clone(),
            workdir: job.workdir.clone(),
            result,
            stage: 0,
        });
        Ok(handle)
    }

    fn submit_all(&mut self, jobs: &[JobRequest]) -> Result<Vec<Result<JobHandle, ExecError>>, BatchFailure> {
        let mut out = Vec::new();
        for (i, job) in jobs.iter().enumerate() {
            if self.fail_batch_after == Some(i) {
                return Err(BatchFailure {
                    submitted: out,
                    reason: format!("scheduler rejected batch at job {}", i + 1),
                });
            }
            out.push(self.submit(job));
        }
        Ok(out)
    }

    fn poll(&mut self, handle: &JobHandle) -> Result<JobStatus, ExecError> {
        let job = self.job_mut(handle)?;
        if job.stage < 2 {
            job.stage += 1;
            if job.stage == 2 {
                let snapshot = job.clone();
                Self::finish(&snapshot)?;
            }
        }
        let job = self.job_mut(handle)?;
        Ok(match (job.stage, &job.result) {
            (0, _) => JobStatus::Queued,
            (1, _) => JobStatus::Running,
            (_, Ok(_)) => JobStatus::Done,
            (_, Err(why)) => JobStatus::Failed(why.clone()),
        })
    }

    fn collect(&mut self, handle: &JobHandle) -> Result<String, ExecError> {
        let job = self.job_mut(handle)?;
        match (&job.result, job.stage) {
            (Ok(text), 2) => Ok(text.clone()),
            (Err(why), 2) => Err(ExecError::Submit(why.clone())),
            _ => Err(ExecError::NotFinished(handle.name.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{submit_batch, wait_all};
    use super::*;

    fn job(dir: &Path, name: &str, input: &str) -> JobRequest {
        JobRequest {
            name: name.into(),
            workdir: dir.join(name),
            input: input.into(),
            cores: 16,
            expected_outputs: vec![format!("{name}.out")],
        }
    }

    fn engine_with(dir: &Path, pairs: &[(&str, &str)]) -> MockEngine {
        let fx = dir.join("fixtures");
        std::fs::create_dir_all(&fx).unwrap();
        let mut map = FixtureMap::default();
        for (i, (input, output)) in pairs.iter().enumerate() {
            let p = fx.join(format!("{i}.out"));
            std::fs::write(&p, output).unwrap();
            map.insert(&input_hash(input), None, p);
        }
        MockEngine::new(map)
    }

    #[test]
    fn normalization_ignores_comments_and_trailing_space() {
        assert_eq!(normalize_input("! SP HF   # c\n\n# x\n%pal  \n"), "! SP HF\n%pal\n");
        assert_eq!(input_hash("a\n"), input_hash("a   # note\n\n"));
        assert_ne!(input_hash("a\n"), input_hash("b\n"));
    }

    #[test]
    fn status_walks_queued_running_done() {
        let dir = tempfile::tempdir().unwrap();
        let mut eng = engine_with(dir.path(), &[("IN\n", "OUT\n****ORCA TERMINATED NORMALLY****\n")]);
        let h = eng.submit(&job(dir.path(), "a", "IN\n")).unwrap();
        assert!(matches!(eng.collect(&h), Err(ExecError::NotFinished(_))));
        assert_eq!(eng.poll(&h).unwrap(), JobStatus::Running);
        assert_eq!(eng.poll(&h).unwrap(), JobStatus::Done);
        assert_eq!(eng.poll(&h).unwrap(), JobStatus::Done);
        assert!(eng.collect(&h).unwrap().starts_with("OUT"));
        assert!(dir.path().join("a/a.out").exists());
        assert!(dir.path().join("a/a.inp").exists());
    }

    #[test]
    fn unknown_handle_and_missing_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let mut eng = engine_with(dir.path(), &[]);
        let ghost = JobHandle { backend_id: "mock-9".into(), name: "x".into() };
        assert!(matches!(eng.poll(&ghost), Err(ExecError::UnknownHandle(_))));
        let h = eng.submit(&job(dir.path(), "b", "nothing\n")).unwrap();
        let s = wait_all(&mut eng, &[h], 5).unwrap();
        assert!(matches!(&s[0], JobStatus::Failed(m) if m.contains("no fixture")));
    }

    #[test]
    fn identical_submissions_identical_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut eng = engine_with(dir.path(), &[("IN\n", "X\n")]);
        let a = eng.submit(&job(dir.path(), "a", "IN\n")).unwrap();
        let b = eng.submit(&job(dir.path(), "b", "IN  \n")).unwrap();
        wait_all(&mut eng, &[a.clone(), b.clone()], 3).unwrap();
        assert_eq!(eng.collect(&a).unwrap(), eng.collect(&b).unwrap());
    }

    #[test]
    fn rounds_select_distinct_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut map = FixtureMap::default();
        for r in 0..2 {
            let p = dir.path().join(format!("r{r}.out"));
            std::fs::write(&p, format!("round {r}\n")).unwrap();
            map.insert(&input_hash("IN\n"), Some(r), p);
        }
        let mut eng = MockEngine::new(map);
        let a = eng.submit(&job(dir.path(), "a", "IN\n")).unwrap();
        let b = eng.submit(&job(dir.path(), "a", "IN\n")).unwrap();
        wait_all(&mut eng, &[a.clone(), b.clone()], 3).unwrap();
        assert_eq!(eng.collect(&a).unwrap(), "round 0\n");
        assert_eq!(eng.collect(&b).unwrap(), "round 1\n");
    }

    #[test]
    fn batch_parallel_and_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let inputs: Vec<String> = (0..5).map(|i| format!("job {i}\n")).collect();
        let pairs: Vec<(&str, &str)> = inputs.iter().map(|i| (i.as_str(), "done\n")).collect();
        let jobs: Vec<JobRequest> =
            inputs.iter().enumerate().map(|(i, inp)| job(dir.path(), &format!("j{i}"), inp)).collect();

        let mut eng = engine_with(dir.path(), &pairs);
        let out = submit_batch(&mut eng, &jobs);
        assert_eq!(out.handles.len(), 5);
        assert!(out.fallback.is_none());

        let mut eng = engine_with(dir.path(), &pairs);
        eng.fail_batch_after = Some(2);
        let out = submit_batch(&mut eng, &jobs);
        assert_eq!(out.handles.len(), 5);
        assert!(out.fallback.as_deref().unwrap().contains("one at a time"));
        let handles: Vec<JobHandle> = out.handles.into_iter().map(Result::unwrap).collect();
        let statuses = wait_all(&mut eng, &handles, 5).unwrap();
        assert!(statuses.iter().all(|s| *s == JobStatus::Done));

        assert!(submit_batch(&mut eng, &[]).handles.is_empty());
    }

    #[test]
    fn individual_failure_leaves_others() {
        let dir = tempfile::tempdir().unwrap();
        let mut eng = engine_with(dir.path(), &[("ok\n", "fine\n")]);
        let mut bad = job(dir.path(), "bad", "ok\n");
        bad.cores = 0;
        let jobs = vec![job(dir.path(), "good", "ok\n"), bad];
        let out = submit_batch(&mut eng, &jobs);
        assert!(out.handles[0].is_ok());
        assert!(out.handles[1].is_err());
    }

    #[test]
    fn map_file_round_trip_and_directory_scan() {
        let dir = tempfile::tempdir().unwrap();
        let jd = dir.path().join("w");
        std::fs::create_dir_all(&jd).unwrap();
        std::fs::write(jd.join("w.inp"), "! SP HF\n").unwrap();
        std::fs::write(jd.join("w.out"), "result\n").unwrap();
        std::fs::write(jd.join("orphan.inp"), "! SP\n").unwrap();
        let map = FixtureMap::from_directory(dir.path()).unwrap();
        assert_eq!(map.len(), 1);
        let text = map.render(dir.path());
        assert_eq!(text, format!("{} w/w.out\n", input_hash("! SP HF\n")));
        let back = FixtureMap::parse(&text, dir.path()).unwrap();
        assert_eq!(back, map);
        assert!(FixtureMap::parse("nothex path\n", dir.path()).is_err());
    }
}
