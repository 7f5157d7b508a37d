//! Bounded feedback loops: input repair from solver error messages and
//! imaginary-frequency removal by mode displacement.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{run_job, ExecBackend, JobRequest};
use crate::geometry::{displace_along_mode, parse_xyz, write_xyz, Molecule, DEFAULT_DISPLACEMENT_AMPLITUDE};
use crate::orca::{parse_output, render_input, CalcSpec, ErrorDiagnosis, Location, ParsedOutput};

pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_IMAGINARY_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    Recovered,
    AcceptedAsIs,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub status: RecoveryStatus,
    pub attempts: u32,
    /// Job name of the last run.
    pub final_job: String,
    pub final_spec: CalcSpec,
    pub final_output: ParsedOutput,
    pub log: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message}")]
pub struct RecoveryError {
    pub message: String,
    /// Log up to the failure.
    pub log: Vec<String>,
}

/// One repaired spec. `changed` is false when the token was not found.
#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub spec: CalcSpec,
    pub changed: bool,
    pub note: String,
}

fn same(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// Removes the diagnosed token from the place the solver complained about.
/// Keyword-line functional and basis are never dropped.
pub fn debug_input(spec: &CalcSpec, diag: &ErrorDiagnosis) -> Repair {
    let token = diag.offending_token.as_str();
    let mut s = spec.clone();
    let changed = match &diag.location {
        Location::KeywordLine => {
            let before = s.keyword_tokens().len();
            let drop_opt = |o: &mut Option<String>| {
                if o.as_deref().is_some_and(|t| same(t, token)) {
                    *o = None;
                }
            };
            drop_opt(&mut s.dispersion);
            drop_opt(&mut s.grid);
            drop_opt(&mut s.scf_convergence);
            s.approximations.retain(|t| !same(t, token));
            s.extra_keywords.retain(|t| !same(t, token));
            s.keyword_tokens().len() < before
        }
        Location::Block(name) => {
            let entries: Option<&mut Vec<_>> = match name.as_str() {
                "scf" => Some(&mut s.scf_block),
                "geom" => s.geom_block.as_mut(),
                _ => None,
            };
            match entries {
                Some(list) => {
                    let before = list.len();
                    list.retain(|e| !same(&e.key, token));
                    list.len() < before
                }
                None => false,
            }
        }
        Location::Unknown => false,
    };
    let note = if changed {
        format!("removed {token} from {}", diag.location)
    } else {
        format!("no-op: {token} not found at {}", diag.location)
    };
    Repair { spec: s, changed, note }
}

/// Mode indices with a negative frequency beyond `threshold`, most negative
/// first.
pub fn check_imaginary(output: &ParsedOutput, threshold: f64) -> Vec<usize> {
    let Some(freqs) = &output.frequencies else { return Vec::new() };
    let mut idx: Vec<usize> = (0..freqs.len())
        .filter(|&i| freqs[i] < 0.0 && freqs[i].abs() > threshold)
        .collect();
    idx.sort_by(|&a, &b| freqs[a].total_cmp(&freqs[b]).then(a.cmp(&b)));
    idx
}

/// A job under supervision. All rounds share `workdir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryJob {
    pub name: String,
    pub workdir: PathBuf,
    pub spec: CalcSpec,
    pub cores: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub max_retries: u32,
    pub threshold: f64,
    pub amplitude: f64,
    pub max_polls: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            max_retries: DEFAULT_MAX_RETRIES,
            threshold: DEFAULT_IMAGINARY_THRESHOLD,
            amplitude: DEFAULT_DISPLACEMENT_AMPLITUDE,
            max_polls: 100,
        }
    }
}

/// `<base>_removed`, `<base>_removed2`, ...
pub fn removed_name(base: &str, round: u32) -> String {
    if round <= 1 {
        format!("{base}_removed")
    } else {
        format!("{base}_removed{round}")
    }
}

fn submit(
    backend: &mut dyn ExecBackend,
    job: &RecoveryJob,
    name: &str,
    spec: &CalcSpec,
    opts: &RecoveryOptions,
    log: &mut Vec<String>,
) -> Result<(ParsedOutput, String), RecoveryError> {
    let fail = |log: &Vec<String>, message: String| RecoveryError {
        message,
        log: log.clone(),
    };
    let input = render_input(spec).map_err(|e| fail(log, format!("{name}: {e}")))?;
    let req = JobRequest {
        name: name.to_string(),
        workdir: job.workdir.clone(),
        input,
        cores: job.cores,
        expected_outputs: vec![format!("{name}.out")],
    };
    let text = run_job(backend, &req, opts.max_polls).map_err(|e| fail(log, e.to_string()))?;
    log.push(format!("ran {name}"));
    Ok((parse_output(&text), text))
}

/// The solver's own diagnosis, or for an unrecognised failure the tail of
/// the output as raw message.
fn diagnosis(output: &ParsedOutput, text: &str) -> Option<ErrorDiagnosis> {
    if let Some(d) = &output.error {
        return Some(d.clone());
    }
    if output.terminated_normally {
        return None;
    }
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let tail = lines[lines.len().saturating_sub(10)..].join("\n");
    Some(ErrorDiagnosis {
        location: Location::Unknown,
        offending_token: String::new(),
        raw_message: if tail.is_empty() { "empty output".into() } else { tail },
    })
}

/// Submit, repair from the solver's error message, resubmit. Each repair
/// removes one token; an undiagnosable error or a no-op repair stops the
/// loop as exhausted.
pub fn input_debug_loop(
    backend: &mut dyn ExecBackend,
    job: &RecoveryJob,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutcome, RecoveryError> {
    let mut log = Vec::new();
    let mut spec = job.spec.clone();
    let mut attempts = 0;
    loop {
        let (output, text) = submit(backend, job, &job.name, &spec, opts, &mut log)?;
        let Some(diag) = diagnosis(&output, &text) else {
            let status = if attempts == 0 {
                RecoveryStatus::AcceptedAsIs
            } else {
                RecoveryStatus::Recovered
            };
            return Ok(RecoveryOutcome {
                status,
                attempts,
                final_job: job.name.clone(),
                final_spec: spec,
                final_output: output,
                log,
            });
        };
        log.push(format!("error: {}", diag.raw_message));
        let exhausted = |spec, log| RecoveryOutcome {
            status: RecoveryStatus::Exhausted,
            attempts,
            final_job: job.name.clone(),
            final_spec: spec,
            final_output: output.clone(),
            log,
        };
        if attempts >= opts.max_retries {
            log.push(format!("giving up after {attempts} repairs"));
            return Ok(exhausted(spec, log));
        }
        let repair = debug_input(&spec, &diag);
        log.push(repair.note.clone());
        if !repair.changed {
            return Ok(exhausted(spec, log));
        }
        spec = repair.spec;
        attempts += 1;
    }
}

fn current_geometry(job: &RecoveryJob, name: &str, output: &ParsedOutput) -> Result<Molecule, String> {
    if let Some(m) = &output.final_geometry {
        return Ok(m.clone());
    }
    let path = job.workdir.join(format!("{name}.xyz"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_xyz(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Displaces along the most negative offending mode and re-runs with the
/// same spec on the new geometry until no offending mode remains.
/// `first` is the parsed output of the run named `job.name`.
pub fn imaginary_frequency_loop(
    backend: &mut dyn ExecBackend,
    job: &RecoveryJob,
    first: &ParsedOutput,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutcome, RecoveryError> {
    let mut log = Vec::new();
    if first.frequencies.is_none() {
        return Err(RecoveryError {
            message: format!("{}: output has no frequencies", job.name),
            log,
        });
    }
    let mut name = job.name.clone();
    let mut spec = job.spec.clone();
    let mut output = first.clone();
    let mut attempts = 0;
    loop {
        let offending = check_imaginary(&output, opts.threshold);
        let freqs = output.frequencies.clone().unwrap_or_default();
        let Some(&mode_idx) = offending.first() else {
            let below: Vec<String> = freqs.iter().filter(|f| **f < 0.0).map(|f| format!("{f:.2}")).collect();
            if !below.is_empty() {
                log.push(format!("{name}: accepted imaginary {} cm**-1 below {} cm**-1", below.join(", "), opts.threshold));
            }
            let status = if attempts == 0 {
                RecoveryStatus::AcceptedAsIs
            } else {
                RecoveryStatus::Recovered
            };
            return Ok(RecoveryOutcome {
                status,
                attempts,
                final_job: name,
                final_spec: spec,
                final_output: output,
                log,
            });
        };
        log.push(format!("{name}: imaginary mode {mode_idx} at {:.2} cm**-1", freqs[mode_idx]));
        if attempts >= opts.max_retries {
            log.push(format!("giving up after {attempts} rounds"));
            return Ok(RecoveryOutcome {
                status: RecoveryStatus::Exhausted,
                attempts,
                final_job: name,
                final_spec: spec,
                final_output: output,
                log,
            });
        }
        let fail = |log: &Vec<String>, message: String| RecoveryError {
            message,
            log: log.clone(),
        };
        let mode = output
            .mode(mode_idx)
            .ok_or_else(|| fail(&log, format!("{name}: displacement vectors for mode {mode_idx} missing")))?;
        let mut mol = current_geometry(job, &name, &output).map_err(|e| fail(&log, e))?;
        mol.charge = spec.geometry.charge;
        mol.multiplicity = spec.geometry.multiplicity;
        let displaced = displace_along_mode(&mol, mode, opts.amplitude).map_err(|e| fail(&log, e.to_string()))?;
        let xyz = format!("{name}_distorted.xyz");
        let path = job.workdir.join(&xyz);
        std::fs::write(&path, write_xyz(&displaced, &format!("{name} displaced along mode {mode_idx}")))
            .map_err(|e| fail(&log, format!("{}: {e}", path.display())))?;
        log.push(format!("wrote {xyz}"));

        attempts += 1;
        name = removed_name(&job.name, attempts);
        spec = spec.with_xyz(&xyz);
        output = submit(backend, job, &name, &spec, opts, &mut log)?.0;
        if output.frequencies.is_none() {
            return Err(fail(&log, format!("{name}: output has no frequencies")));
        }
    }
}
