use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qflow")).args(args).current_dir(cwd).output().unwrap()
}

fn core() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").canonicalize().unwrap()
}

fn workflow() -> PathBuf {
    core().join("workflows/ce_conformers")
}

fn data(name: &str) -> String {
    core().join("data").join(name).display().to_string()
}

/// The bundled workflow config with relative paths made absolute and
/// `edits` applied as plain text replacements.
fn config_variant(dir: &Path, edits: &[(&str, &str)]) -> PathBuf {
    let wf = workflow();
    let mut text = std::fs::read_to_string(wf.join("config.toml")).unwrap();
    for key in ["rules", "fixtures", "seed"] {
        let (from, to) = match key {
            "rules" => ("rules = \"rules.toml\"", format!("rules = {:?}", wf.join("rules.toml"))),
            "fixtures" => ("fixtures = \"fixtures\"", format!("fixtures = {:?}", wf.join("fixtures"))),
            _ => ("seed = \"seed\"", format!("seed = {:?}", wf.join("seed"))),
        };
        assert!(text.contains(from));
        text = text.replace(from, &to);
    }
    for (from, to) in edits {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn run_reference_workflow_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = workflow().join("config.toml");
    let out = qflow(
        &["run", "--config", cfg.to_str().unwrap(), "--id", "ce", "--export-trace", "ce.ipynb"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["status"], "done");
    assert_eq!(r["counters"]["acting"], 13);
    assert_eq!(r["counters"]["commanding"], r["counters"]["reporting"]);
    assert!(dir.path().join(".qflow/ce/work/cn9_YICLED_SP/cn9_YICLED_SP.out").exists());

    let nb: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ce.ipynb")).unwrap()).unwrap();
    assert_eq!(nb["nbformat"], 4);
    let code = nb["cells"].as_array().unwrap().iter().filter(|c| c["cell_type"] == "code").count();
    assert_eq!(code, 13);

    let out = qflow(&["export-trace", "ce", "--format", "notebook"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout_json(&out), nb);

    let out = qflow(&["export-trace", "ce", "--format", "log", "-o", "ce.log"], dir.path());
    assert!(out.status.success());
    let log = std::fs::read_to_string(dir.path().join("ce.log")).unwrap();
    let events = std::fs::read_to_string(dir.path().join(".qflow/ce/trace.jsonl")).unwrap();
    assert_eq!(log.lines().count(), events.lines().count());

    // a second run into the same directory is refused
    let again = qflow(&["run", "--config", cfg.to_str().unwrap(), "--id", "ce"], dir.path());
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn task_override_from_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("task.txt"), "Rank the conformers.").unwrap();
    let cfg = workflow().join("config.toml");
    let out = qflow(
        &["run", "task.txt", "--config", cfg.to_str().unwrap(), "--workdir", "s", "--backend", "scripted"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("s/trace.jsonl")).unwrap();
    let first: Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["summary"], "Rank the conformers.");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflow(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    let bad = config_variant(dir.path(), &[("callable_modules = [\"submit_slurm_jobs\"]", "callable_modules = [\"run_orca\"]")]);
    let out = qflow(&["run", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));

    let out = qflow(&["export-trace", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_variant(dir.path(), &[("max_steps = 200", "max_steps = 5")]);
    let out = qflow(&["run", "--config", cfg.to_str().unwrap(), "--workdir", "s"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["status"], "budget_exceeded");
}

#[test]
fn recovery_exhausted_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_variant(dir.path(), &[("[limits]", "[recovery]\nmax_retries = 1\nthreshold = 15.0\namplitude = 0.1\nmax_polls = 100\n\n[limits]")]);
    let out = qflow(&["run", "--config", cfg.to_str().unwrap(), "--workdir", "s"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["recovery_exhausted"], true);
}

#[test]
fn analyze_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = qflow(&["analyze", "ring-strain", "--input", &data("ring_strain.csv")], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Ring Strain Energies (relative to n=6)"));
    for row in ["3\t13.86", "4\t13.63", "5\t-2.20", "6\t0.00", "7\t8.13", "8\t10.85"] {
        assert!(text.contains(&format!("\n{row}\t")), "{row}\n{text}");
    }

    let out = qflow(&["analyze", "pka", "--delta-g", "30.09"], dir.path());
    assert!(String::from_utf8(out.stdout).unwrap().contains("input\t30.09\t22.05"));

    let out = qflow(
        &["analyze", "reaction", "--input", &data("ring_strain.csv"), "--reaction", "cyclobutane -> methylcyclopropane", "--json"],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert!((v[0]["delta_h"].as_f64().unwrap() - 0.23).abs() < 0.01);

    let out = qflow(&["analyze", "relative", "--input", &data("ce_conformers_sp.csv")], dir.path());
    assert!(String::from_utf8(out.stdout).unwrap().contains("capped_square_antiprismatic_0\t0.00 (most stable)"));
}

#[test]
fn analyze_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = qflow(&["analyze", "ring-strain", "--input", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = qflow(&["analyze", "pka"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = qflow(&["analyze", "reaction", "--input", &data("ring_strain.csv"), "--reaction", "a -> b"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a"));
}
