//! Built-in tools. Job entries name a directory under the workdir holding
//! `<dir>/<basename>.inp`, or an explicit `.inp`/`.out` path.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::{Param, ParamType, ToolContext, ToolError, ToolRegistry, ToolResult, ToolSpec};
use crate::exec::{allocate_cores, submit_batch, wait_all, JobRequest, JobStatus, Solvation};
use crate::geometry::parse_xyz;
use crate::orca::{
    extract_property, parse_input, parse_output, render_input, validate_spec, validate_text, CalcSpec,
    ParsedOutput,
};
use crate::recovery::{check_imaginary, imaginary_frequency_loop, input_debug_loop, RecoveryJob, RecoveryStatus};
use crate::thermo::analysis::{self, Analysis};
use crate::thermo::{EnergyTable, Property, ThermoRecord};
use crate::util::safe_join;

type Args = Map<String, Value>;

fn string<'a>(args: &'a Args, key: &str) -> Result<&'a str, String> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("{key} must be a string"))
}

fn opt_string<'a>(args: &'a Args, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str)
}

fn strings(args: &Args, key: &str) -> Result<Vec<String>, String> {
    let items = args
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("{key} must be an array"))?;
    items
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("{key} entries must be strings")))
        .collect()
}

fn rel(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

fn read(path: &Path, root: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", rel(root, path)))
}

fn write(path: &Path, root: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", rel(root, parent)))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", rel(root, path)))
}

/// A job directory and the job name inside it.
#[derive(Debug, Clone, PartialEq)]
struct JobRef {
    dir: PathBuf,
    name: String,
}

impl JobRef {
    fn locate(root: &Path, entry: &str) -> Result<Self, String> {
        let path = safe_join(root, entry)?;
        let ext = path.extension().and_then(|e| e.to_str());
        if matches!(ext, Some("inp" | "out")) {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let dir = path.parent().unwrap_or(root).to_path_buf();
            return Ok(Self { dir, name });
        }
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .ok_or_else(|| format!("{entry:?} does not name a job"))?
            .to_string();
        Ok(Self { dir: path, name })
    }

    fn file(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.name))
    }

    fn output(&self, root: &Path) -> Result<ParsedOutput, String> {
        Ok(parse_output(&read(&self.file("out"), root)?))
    }

    fn spec(&self, root: &Path) -> Result<CalcSpec, String> {
        let text = read(&self.file("spec.json"), root)?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", rel(root, &self.file("spec.json"))))
    }
}

fn spec_from(ctx: &ToolContext<'_>, args: &Args) -> Result<CalcSpec, String> {
    match (args.get("spec"), opt_string(args, "spec_path")) {
        (Some(v), _) => serde_json::from_value(v.clone()).map_err(|e| format!("spec: {e}")),
        (None, Some(p)) => {
            let path = safe_join(ctx.workdir, p)?;
            serde_json::from_str(&read(&path, ctx.workdir)?).map_err(|e| format!("{p}: {e}"))
        }
        (None, None) => Err("either spec or spec_path is required".into()),
    }
}

fn read_file_content(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let p = string(args, "path")?;
    let path = safe_join(ctx.workdir, p)?;
    let text = read(&path, ctx.workdir)?;
    let mut r = ToolResult::success(text.clone(), json!({ "path": p, "content": text }));
    r.summary = format!("{p}:\n{text}");
    Ok(r)
}

fn parse_xyz_tool(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let p = string(args, "path")?;
    let path = safe_join(ctx.workdir, p)?;
    let mol = parse_xyz(&read(&path, ctx.workdir)?).map_err(|e| format!("{p}: {e}"))?;
    Ok(ToolResult::success(
        format!("{p}: {} atoms, {}", mol.len(), mol.formula()),
        json!({ "path": p, "atoms": mol.len(), "formula": mol.formula() }),
    ))
}

fn update_global_memory(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let text = string(args, "text")?;
    let ts = ctx.clock.now();
    let entry = ctx.global.append(ctx.agent, text, &ts).map_err(|e| e.to_string())?;
    Ok(ToolResult::success(
        format!("global memory entry {} saved", entry.seq),
        json!({ "seq": entry.seq }),
    ))
}

fn generate_input(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let template = spec_from(ctx, args)?;
    let solvation: Option<Solvation> = opt_string(args, "solvation")
        .map(|s| serde_json::from_value(json!(s)).map_err(|_| format!("unknown solvation {s:?}")))
        .transpose()?;
    let jobs = args
        .get("jobs")
        .and_then(Value::as_array)
        .ok_or("jobs must be an array")?;
    if jobs.is_empty() {
        return Err("no jobs given".into());
    }
    let mut lines = Vec::new();
    let mut payload = Vec::new();
    let mut artifacts = Vec::new();
    let mut notes = Vec::new();
    for job in jobs {
        let job = job.as_object().ok_or("jobs entries must be objects")?;
        let name = string(job, "job")?;
        let dir = safe_join(ctx.workdir, opt_string(job, "dir").unwrap_or(name))?;
        let mut spec = template.clone();
        if let Some(c) = job.get("charge").and_then(Value::as_i64) {
            spec.geometry.charge = c as i32;
        }
        if let Some(m) = job.get("multiplicity").and_then(Value::as_u64) {
            spec.geometry.multiplicity = m as u32;
        }
        if let Some(xyz) = opt_string(job, "xyz") {
            let src = safe_join(ctx.workdir, xyz)?;
            let file = src
                .file_name()
                .and_then(|f| f.to_str())
                .ok_or_else(|| format!("{xyz:?} is not a file"))?
                .to_string();
            let dst = dir.join(&file);
            if src != dst {
                let text = read(&src, ctx.workdir)?;
                write(&dst, ctx.workdir, &text)?;
                artifacts.push(rel(ctx.workdir, &dst));
            }
            spec.geometry.xyz_file = file;
        }
        if let Some(solv) = solvation {
            let xyz = dir.join(&spec.geometry.xyz_file);
            let mol = parse_xyz(&read(&xyz, ctx.workdir)?).map_err(|e| format!("{}: {e}", rel(ctx.workdir, &xyz)))?;
            spec.nprocs = allocate_cores(mol.len(), solv, ctx.node_cores);
        }
        let text = render_input(&spec).map_err(|e| format!("{name}: {e}"))?;
        let jr = JobRef { dir: dir.clone(), name: name.to_string() };
        write(&jr.file("inp"), ctx.workdir, &text)?;
        let sidecar = serde_json::to_string_pretty(&spec).expect("specs serialize");
        write(&jr.file("spec.json"), ctx.workdir, &sidecar)?;
        artifacts.push(rel(ctx.workdir, &jr.file("inp")));
        artifacts.push(rel(ctx.workdir, &jr.file("spec.json")));

        let flags: Vec<String> = validate_spec(&spec, ctx.catalog)
            .map_err(|e| format!("{name}: {e}"))?
            .iter()
            .map(ToString::to_string)
            .collect();
        let mut line = format!("{}: {} cores", rel(ctx.workdir, &jr.file("inp")), spec.nprocs);
        if !flags.is_empty() {
            line.push_str(&format!(", not in catalog: {}", flags.join(", ")));
            notes.push(format!("{name}: {}", flags.join(", ")));
        }
        lines.push(line);
        payload.push(json!({ "job": name, "input": rel(ctx.workdir, &jr.file("inp")), "cores": spec.nprocs, "violations": flags }));
    }
    let mut r = ToolResult::success(
        format!("generated {} input file(s)\n{}", lines.len(), lines.join("\n")),
        Value::Array(payload),
    );
    r.artifacts = artifacts;
    r.notes = notes;
    Ok(r)
}

fn validate_input(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let mut lines = Vec::new();
    let mut payload = Vec::new();
    for entry in strings(args, "jobs")? {
        let job = JobRef::locate(ctx.workdir, &entry)?;
        let text = read(&job.file("inp"), ctx.workdir)?;
        let violations = validate_text(&text, ctx.catalog).map_err(|e| format!("{entry}: {e}"))?;
        let shown: Vec<String> = violations.iter().map(ToString::to_string).collect();
        lines.push(if shown.is_empty() {
            format!("{}: valid", job.name)
        } else {
            format!("{}: invalid ({})", job.name, shown.join(", "))
        });
        payload.push(json!({ "job": job.name, "violations": violations }));
    }
    Ok(ToolResult::success(lines.join("\n"), Value::Array(payload)))
}

fn describe(name: &str, out: &ParsedOutput) -> String {
    if let Some(e) = &out.error {
        return format!("{name}: error {} @ {}", e.offending_token, e.location);
    }
    if !out.terminated_normally {
        return format!("{name}: abnormal termination");
    }
    let mut s = format!("{name}: terminated normally");
    if let Some(e) = &out.scf_energy {
        s.push_str(&format!(", E = {e} Eh"));
    }
    if let Some(g) = &out.gibbs {
        s.push_str(&format!(", G = {g} Eh"));
    }
    s
}

fn submit_slurm_jobs(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let entries = strings(args, "jobs")?;
    let forced = args.get("cores").and_then(Value::as_u64).map(|c| c as u32);
    let mut jobs = Vec::new();
    let mut refs = Vec::new();
    for entry in &entries {
        let job = JobRef::locate(ctx.workdir, entry)?;
        let input = read(&job.file("inp"), ctx.workdir)?;
        let cores = forced
            .or_else(|| parse_input(&input).ok().and_then(|d| d.nprocs()))
            .unwrap_or(1);
        jobs.push(JobRequest {
            name: job.name.clone(),
            workdir: job.dir.clone(),
            input,
            cores,
            expected_outputs: vec![format!("{}.out", job.name)],
        });
        refs.push(job);
    }
    let outcome = submit_batch(ctx.exec, &jobs);
    let submitted: Vec<_> = outcome.handles.iter().filter_map(|h| h.as_ref().ok().cloned()).collect();
    let statuses = wait_all(ctx.exec, &submitted, ctx.recovery.max_polls).map_err(|e| e.to_string())?;

    let mut lines = Vec::new();
    let mut payload = Vec::new();
    let mut artifacts = Vec::new();
    let mut all_done = true;
    let mut next = statuses.into_iter();
    for ((job, handle), req) in refs.iter().zip(&outcome.handles).zip(&jobs) {
        let status = match handle {
            Ok(_) => next.next().unwrap_or(JobStatus::Queued),
            Err(e) => JobStatus::Failed(e.to_string()),
        };
        match &status {
            JobStatus::Done => {
                let out = job.output(ctx.workdir)?;
                artifacts.push(rel(ctx.workdir, &job.file("out")));
                lines.push(describe(&job.name, &out));
                payload.push(json!({
                    "job": job.name,
                    "status": "done",
                    "cores": req.cores,
                    "terminated_normally": out.terminated_normally,
                    "error": out.error,
                }));
            }
            other => {
                all_done = false;
                let why = match other {
                    JobStatus::Failed(w) => w.clone(),
                    _ => "did not finish".into(),
                };
                lines.push(format!("{}: failed ({why})", job.name));
                payload.push(json!({ "job": job.name, "status": "failed", "detail": why }));
            }
        }
    }
    let mode = if outcome.fallback.is_some() { "one at a time after batch failure" } else { "in parallel" };
    let mut summary = format!("submitted {} job(s) {mode}\n{}", jobs.len(), lines.join("\n"));
    let mut notes = Vec::new();
    if let Some(f) = outcome.fallback {
        summary.push_str(&format!("\n{f}"));
        notes.push(f);
    }
    let mut r = ToolResult::success(summary, json!({ "jobs": payload, "all_done": all_done }));
    r.artifacts = artifacts;
    r.notes = notes;
    Ok(r)
}

fn extract_properties(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let p = string(args, "path")?;
    let path = safe_join(ctx.workdir, p)?;
    let out = parse_output(&read(&path, ctx.workdir)?);
    let mut payload = Map::new();
    let mut lines = Vec::new();
    for key in strings(args, "keys")? {
        let v = extract_property(&out, &key).map_err(|e| e.to_string())?;
        lines.push(format!("{key}: {v}"));
        payload.insert(key, serde_json::to_value(&v).expect("values serialize"));
    }
    Ok(ToolResult::success(format!("{p}\n{}", lines.join("\n")), Value::Object(payload)))
}

fn check_imaginary_frequency(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let threshold = ctx.recovery.threshold;
    let mut lines = Vec::new();
    let mut payload = Vec::new();
    for entry in strings(args, "jobs")? {
        let job = JobRef::locate(ctx.workdir, &entry)?;
        let out = job.output(ctx.workdir)?;
        let freqs = out
            .frequencies
            .clone()
            .ok_or_else(|| format!("{}: no frequencies in output", job.name))?;
        let offending: Vec<f64> = check_imaginary(&out, threshold).iter().map(|&i| freqs[i]).collect();
        let small: Vec<f64> = freqs.iter().copied().filter(|f| *f < 0.0 && f.abs() <= threshold).collect();
        let fmt = |v: &[f64]| v.iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>().join(", ");
        lines.push(match (offending.is_empty(), small.is_empty()) {
            (false, _) => format!("{}: imaginary frequencies {} cm**-1", job.name, fmt(&offending)),
            (true, false) => format!("{}: {} cm**-1 below the {threshold} cm**-1 threshold, accepted", job.name, fmt(&small)),
            (true, true) => format!("{}: no imaginary frequencies", job.name),
        });
        payload.push(json!({ "job": job.name, "imaginary": offending, "accepted": small }));
    }
    Ok(ToolResult::success(lines.join("\n"), Value::Array(payload)))
}

fn recovery_job(ctx: &ToolContext<'_>, job: &JobRef) -> Result<RecoveryJob, String> {
    let spec = job.spec(ctx.workdir)?;
    Ok(RecoveryJob {
        name: job.name.clone(),
        workdir: job.dir.clone(),
        cores: spec.nprocs,
        spec,
    })
}

fn debug_input_file(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let mut lines = Vec::new();
    let mut payload = Vec::new();
    let mut exhausted = false;
    let mut artifacts = Vec::new();
    for entry in strings(args, "jobs")? {
        let job = JobRef::locate(ctx.workdir, &entry)?;
        if let Ok(out) = job.output(ctx.workdir) {
            if out.terminated_normally && out.error.is_none() {
                lines.push(format!("{}: no input errors", job.name));
                payload.push(json!({ "job": job.name, "status": "clean", "attempts": 0 }));
                continue;
            }
        }
        let rj = recovery_job(ctx, &job)?;
        let outcome = input_debug_loop(ctx.exec, &rj, &ctx.recovery).map_err(|e| {
            format!("{}: {} (log: {})", job.name, e.message, e.log.join("; "))
        })?;
        let repairs: Vec<&str> = outcome
            .log
            .iter()
            .filter(|l| l.starts_with("removed") || l.starts_with("no-op"))
            .map(String::as_str)
            .collect();
        let line = match outcome.status {
            RecoveryStatus::Exhausted => {
                exhausted = true;
                let last = outcome.log.last().cloned().unwrap_or_default();
                format!("{}: could not be repaired after {} attempt(s) ({last})", job.name, outcome.attempts)
            }
            _ => format!("{}: fixed after {} repair(s): {}", job.name, outcome.attempts, repairs.join("; ")),
        };
        let sidecar = serde_json::to_string_pretty(&outcome.final_spec).expect("specs serialize");
        write(&job.file("spec.json"), ctx.workdir, &sidecar)?;
        artifacts.push(rel(ctx.workdir, &job.file("out")));
        lines.push(line);
        payload.push(json!({
            "job": job.name,
            "status": outcome.status,
            "attempts": outcome.attempts,
            "log": outcome.log,
        }));
    }
    let mut r = ToolResult::success(lines.join("\n"), Value::Array(payload));
    r.exhausted = exhausted;
    r.artifacts = artifacts;
    Ok(r)
}

fn remove_imaginary_frequency(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let mut lines = Vec::new();
    let mut payload = Vec::new();
    let mut exhausted = false;
    let mut artifacts = Vec::new();
    for entry in strings(args, "jobs")? {
        let job = JobRef::locate(ctx.workdir, &entry)?;
        let first = job.output(ctx.workdir)?;
        let rj = recovery_job(ctx, &job)?;
        let outcome = imaginary_frequency_loop(ctx.exec, &rj, &first, &ctx.recovery).map_err(|e| {
            format!("{}: {} (log: {})", job.name, e.message, e.log.join("; "))
        })?;
        let final_ref = JobRef { dir: job.dir.clone(), name: outcome.final_job.clone() };
        let xyz = final_ref.file("xyz");
        let geometry = if xyz.exists() { Some(rel(ctx.workdir, &xyz)) } else { None };
        let accepted: Vec<&String> = outcome.log.iter().filter(|l| l.contains("accepted")).collect();
        let line = match outcome.status {
            RecoveryStatus::Exhausted => {
                exhausted = true;
                format!("{}: imaginary frequencies remain after {} round(s)", job.name, outcome.attempts)
            }
            RecoveryStatus::AcceptedAsIs => format!("{}: nothing to remove", job.name),
            RecoveryStatus::Recovered => format!(
                "{}: removed in {} round(s), final job {}",
                job.name, outcome.attempts, outcome.final_job
            ),
        };
        let mut line = line;
        if let Some(g) = &geometry {
            line.push_str(&format!(", geometry {g}"));
            artifacts.push(g.clone());
        }
        for a in &accepted {
            line.push_str(&format!("; {a}"));
        }
        lines.push(line);
        payload.push(json!({
            "job": job.name,
            "status": outcome.status,
            "rounds": outcome.attempts,
            "final_job": outcome.final_job,
            "geometry": geometry,
            "frequencies": outcome.final_output.frequencies,
            "log": outcome.log,
        }));
    }
    let mut r = ToolResult::success(lines.join("\n"), Value::Array(payload));
    r.exhausted = exhausted;
    r.artifacts = artifacts;
    Ok(r)
}

fn relative_energies_tool(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let outputs = strings(args, "outputs")?;
    let labels = match args.get("labels") {
        Some(_) => strings(args, "labels")?,
        None => Vec::new(),
    };
    if !labels.is_empty() && labels.len() != outputs.len() {
        return Err("labels and outputs differ in length".into());
    }
    let property: Property = opt_string(args, "property").unwrap_or("E").parse()?;
    let mut records = Vec::new();
    for (i, entry) in outputs.iter().enumerate() {
        let job = JobRef::locate(ctx.workdir, entry)?;
        let out = job.output(ctx.workdir)?;
        let value = match property {
            Property::E => out.scf_energy,
            Property::H => out.enthalpy,
            Property::G => out.gibbs,
        }
        .ok_or_else(|| format!("{}: no {property} in output", job.name))?;
        let label = labels.get(i).cloned().unwrap_or_else(|| job.name.clone());
        records.push(ThermoRecord::new(label).with(property, &value.to_string()));
    }
    let table = EnergyTable::from_records(records);
    let a = Analysis::Relative {
        property: Some(property),
        title: opt_string(args, "title").map(str::to_string),
    };
    let out = analysis::run(&a, Some(&table), ctx.constants).map_err(|e| e.to_string())?;
    Ok(ToolResult::success(out.render(), out.values))
}

fn analyze_energy_table(ctx: &mut ToolContext<'_>, args: &Args) -> Result<ToolResult, String> {
    let a: Analysis = serde_json::from_value(Value::Object(
        args.get("analysis").and_then(Value::as_object).cloned().ok_or("analysis must be an object")?,
    ))
    .map_err(|e| format!("analysis: {e}"))?;
    let table = match opt_string(args, "table") {
        Some(p) => {
            let path = safe_join(ctx.workdir, p)?;
            Some(EnergyTable::parse(&read(&path, ctx.workdir)?).map_err(|e| format!("{p}: {e}"))?)
        }
        None => None,
    };
    let out = analysis::run(&a, table.as_ref(), ctx.constants).map_err(|e| e.to_string())?;
    Ok(ToolResult::success(out.render(), out.values))
}

fn spec(name: &str, description: &str, reentrant: bool, params: Vec<Param>) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        description: description.into(),
        params,
        reentrant,
    }
}

pub fn register_builtins(r: &mut ToolRegistry) -> Result<(), ToolError> {
    use ParamType::*;
    let jobs = || Param::required("jobs", Array, "job directories or input paths relative to the workdir");
    let table: Vec<(ToolSpec, super::Handler)> = vec![
        (
            spec("read_file_content", "Reads the content of the file.", true, vec![
                Param::required("path", String, "file path relative to the workdir"),
            ]),
            Arc::new(read_file_content),
        ),
        (
            spec("parse_xyz", "Reads an XYZ file and reports its atom count and formula.", true, vec![
                Param::required("path", String, "xyz file relative to the workdir"),
            ]),
            Arc::new(parse_xyz_tool),
        ),
        (
            spec("update_global_memory", "Updates global memory.", true, vec![
                Param::required("text", String, "entry text"),
            ]),
            Arc::new(update_global_memory),
        ),
        (
            spec(
                "generate_input",
                "Renders solver input files from a calculation spec, one per job, and checks them against the keyword catalog.",
                false,
                vec![
                    Param::optional("spec", Object, "calculation spec shared by all jobs"),
                    Param::optional("spec_path", String, "JSON spec file relative to the workdir"),
                    Param::required("jobs", Array, "objects with job, optional dir, xyz, charge, multiplicity"),
                    Param::optional("solvation", String, "gas, implicit or explicit_cluster; sets cores from the atom count"),
                ],
            ),
            Arc::new(generate_input),
        ),
        (
            spec("validate_input", "Checks input files against the allowed keyword catalog.", true, vec![jobs()]),
            Arc::new(validate_input),
        ),
        (
            spec(
                "submit_slurm_jobs",
                "Submits ORCA calculations using SLURM.",
                false,
                vec![jobs(), Param::optional("cores", Integer, "override the cores taken from %pal")],
            ),
            Arc::new(submit_slurm_jobs),
        ),
        (
            spec(
                "extract_properties_from_orca_outputfile",
                "Queries the output file by searching for the relative sections.",
                true,
                vec![
                    Param::required("path", String, "output file relative to the workdir"),
                    Param::required("keys", Array, "property keys"),
                ],
            ),
            Arc::new(extract_properties),
        ),
        (
            spec(
                "check_imaginary_frequency",
                "Checks if the frequency calculation has imaginary frequencies.",
                true,
                vec![jobs()],
            ),
            Arc::new(check_imaginary_frequency),
        ),
        (
            spec(
                "debug_input_file",
                "Resubmits failed jobs, removing the token named in each solver error until the input runs.",
                false,
                vec![jobs()],
            ),
            Arc::new(debug_input_file),
        ),
        (
            spec(
                "remove_imaginary_frequency",
                "Displaces the geometry along the imaginary mode and re-optimizes until no imaginary frequency remains.",
                false,
                vec![jobs()],
            ),
            Arc::new(remove_imaginary_frequency),
        ),
        (
            spec(
                "relative_energies",
                "Tabulates energies of finished jobs relative to the lowest one in kcal/mol.",
                true,
                vec![
                    Param::required("outputs", Array, "job directories or output paths"),
                    Param::optional("labels", Array, "row labels, one per output"),
                    Param::optional("property", String, "E, H or G (default E)"),
                    Param::optional("title", String, "table title"),
                ],
            ),
            Arc::new(relative_energies_tool),
        ),
        (
            spec(
                "analyze_energy_table",
                "Runs pka, calibrate-pka, ring-strain, reaction or relative analysis on an energy table.",
                true,
                vec![
                    Param::required("analysis", Object, "analysis with a kind field"),
                    Param::optional("table", String, "energy table relative to the workdir"),
                ],
            ),
            Arc::new(analyze_energy_table),
        ),
    ];
    for (s, h) in table {
        r.register(s, h)?;
    }
    Ok(())
}
