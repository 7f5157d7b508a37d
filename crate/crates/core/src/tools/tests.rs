use super::*;
use crate::exec::FnEngine;
use crate::geometry::{write_xyz, Atom, Molecule};
use crate::orca::synth::{reject_input, OutputBuilder};
use crate::orca::{BlockEntry, CalcSpec, RunType};
use std::path::PathBuf;

struct Env {
    dir: tempfile::TempDir,
    exec: FnEngine,
    catalog: KeywordCatalog,
    constants: Constants,
    global: GlobalMemory,
    clock: Clock,
}

impl Env {
    fn new() -> Self {
        let catalog = KeywordCatalog::default();
        let judge = catalog.clone();
        Self {
            dir: tempfile::tempdir().unwrap(),
            exec: FnEngine::new(move |job| {
                if let Some(err) = reject_input(&job.name, &job.input, &judge) {
                    return Ok(err);
                }
                Ok(OutputBuilder::new(&job.name)
                    .coordinates(&water())
                    .scf(9, "-76.30")
                    .frequencies(&[-50.0, 1600.0, 3700.0, 3800.0], &[])
                    .terminate())
            }),
            catalog,
            constants: Constants::default(),
            global: GlobalMemory::in_memory(),
            clock: Clock::Fixed("t".into()),
        }
    }

    fn root(&self) -> PathBuf {
        self.dir.path().to_path_buf()
    }

    fn ctx(&mut self) -> ToolContext<'_> {
        ToolContext {
            workdir: self.dir.path(),
            agent: "tester",
            exec: &mut self.exec,
            catalog: &self.catalog,
            constants: &self.constants,
            recovery: RecoveryOptions::default(),
            node_cores: 48,
            global: &mut self.global,
            clock: &self.clock,
        }
    }
}

fn water() -> Molecule {
    let atom = |e: &str, x: f64, y: f64| Atom {
        element: e.into(),
        position: [x, y, 0.0],
    };
    Molecule::new(vec![atom("O", 0.0, 0.0), atom("H", 0.76, 0.59), atom("H", -0.76, 0.59)], 0, 1).unwrap()
}

fn args(v: Value) -> Map<String, Value> {
    v.as_object().cloned().unwrap()
}

fn stub(name: &str, params: Vec<Param>) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        description: "stub".into(),
        params,
        reentrant: true,
    }
}

#[test]
fn register_resolve_and_action_space() {
    let mut r = ToolRegistry::new();
    r.register(stub("a", vec![]), Arc::new(|_, _| Ok(ToolResult::success("ok", Value::Null))))
        .unwrap();
    let dup = r.register(stub("a", vec![]), Arc::new(|_, _| Ok(ToolResult::default())));
    assert_eq!(dup, Err(ToolError::Duplicate("a".into())));

    let own = vec!["a".to_string()];
    assert_eq!(r.resolve("x", &own, "a").unwrap().name, "a");
    assert_eq!(r.resolve("x", &own, "zzz"), Err(ToolError::Unknown("zzz".into())));
    assert!(matches!(
        r.resolve("y", &["b".to_string()], "a"),
        Err(ToolError::ActionSpace { .. })
    ));
}

#[test]
fn schema_validation() {
    let r = ToolRegistry::with_builtins();
    assert!(r.validate("read_file_content", &args(json!({"path": "x"}))).is_ok());
    for bad in [json!({}), json!({"path": 3}), json!({"path": "x", "extra": 1})] {
        assert!(matches!(
            r.validate("read_file_content", &args(bad)),
            Err(ToolError::Schema { .. })
        ));
    }
    let catalog = r.catalog();
    assert!(catalog
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["name"] == "submit_slurm_jobs" && t["reentrant"] == false));
}

#[test]
fn failing_handler_and_summary_cap() {
    let mut r = ToolRegistry::new();
    r.register(stub("boom", vec![]), Arc::new(|_, _| Err("disk on fire".into())))
        .unwrap();
    r.register(
        stub("chatty", vec![]),
        Arc::new(|_, _| Ok(ToolResult::success("y".repeat(5000), Value::Null))),
    )
    .unwrap();
    r.register(stub("quiet", vec![]), Arc::new(|_, _| Ok(ToolResult::success("", Value::Null))))
        .unwrap();
    let mut env = Env::new();
    let res = r.invoke(&mut env.ctx(), "boom", &Map::new()).unwrap();
    assert!(!res.ok);
    assert!(res.summary.contains("disk on fire"));
    assert_eq!(res.payload["error"], "boom failed: disk on fire");

    let res = r.invoke(&mut env.ctx(), "chatty", &Map::new()).unwrap();
    assert_eq!(res.summary.chars().count(), DEFAULT_SUMMARY_CAP);
    let res = r.invoke(&mut env.ctx(), "quiet", &Map::new()).unwrap();
    assert!(!res.summary.is_empty());
}

#[test]
fn file_tools_stay_inside_workdir() {
    let r = ToolRegistry::with_builtins();
    let mut env = Env::new();
    std::fs::write(env.root().join("w.xyz"), write_xyz(&water(), "water")).unwrap();
    let res = r.invoke(&mut env.ctx(), "parse_xyz", &args(json!({"path": "w.xyz"}))).unwrap();
    assert!(res.ok);
    assert_eq!(res.payload["atoms"], 3);
    let res = r
        .invoke(&mut env.ctx(), "read_file_content", &args(json!({"path": "../etc/passwd"})))
        .unwrap();
    assert!(!res.ok);
    assert!(res.summary.contains("escapes"));

    let res = r
        .invoke(&mut env.ctx(), "update_global_memory", &args(json!({"text": "note"})))
        .unwrap();
    assert!(res.ok);
    assert_eq!(env.global.entries()[0].author, "tester");
}

fn opt_spec() -> Value {
    let mut s = CalcSpec::minimal("placeholder.xyz");
    s.runtypes = RunType::parse_set("OPT_FREQ").unwrap();
    s.functional = "PBE0".into();
    s.basis = "def2-SVP".into();
    s.nprocs = 8;
    s.scf_block = vec![BlockEntry::new("TightSCF", "true"), BlockEntry::new("MaxIter", 500)];
    serde_json::to_value(s).unwrap()
}

#[test]
fn generate_submit_debug_and_check() {
    let r = ToolRegistry::with_builtins();
    let mut env = Env::new();
    std::fs::write(env.root().join("w.xyz"), write_xyz(&water(), "water")).unwrap();

    let res = r
        .invoke(
            &mut env.ctx(),
            "generate_input",
            &args(json!({
                "spec": opt_spec(),
                "jobs": [{"job": "water_opt", "xyz": "w.xyz"}],
                "solvation": "implicit",
            })),
        )
        .unwrap();
    assert!(res.ok, "{}", res.summary);
    assert!(res.summary.contains("16 cores"));
    assert!(res.summary.contains("TIGHTSCF @ block(scf)"));
    for a in &res.artifacts {
        assert!(env.root().join(a).exists(), "{a}");
    }

    let res = r.invoke(&mut env.ctx(), "validate_input", &args(json!({"jobs": ["water_opt"]}))).unwrap();
    assert!(res.summary.contains("invalid"));

    let res = r.invoke(&mut env.ctx(), "submit_slurm_jobs", &args(json!({"jobs": ["water_opt"]}))).unwrap();
    assert!(res.ok);
    assert!(res.summary.contains("water_opt: error TIGHTSCF @ block(scf)"), "{}", res.summary);

    let res = r.invoke(&mut env.ctx(), "debug_input_file", &args(json!({"jobs": ["water_opt"]}))).unwrap();
    assert!(res.ok && !res.exhausted, "{}", res.summary);
    assert!(res.summary.contains("fixed after 1 repair(s)"), "{}", res.summary);
    let sidecar: CalcSpec =
        serde_json::from_str(&std::fs::read_to_string(env.root().join("water_opt/water_opt.spec.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar.scf_block.len(), 1);

    let res = r
        .invoke(&mut env.ctx(), "check_imaginary_frequency", &args(json!({"jobs": ["water_opt"]})))
        .unwrap();
    assert!(res.summary.contains("imaginary frequencies -50.00"), "{}", res.summary);

    let res = r
        .invoke(
            &mut env.ctx(),
            "extract_properties_from_orca_outputfile",
            &args(json!({"path": "water_opt/water_opt.out", "keys": ["total_scf_energy"]})),
        )
        .unwrap();
    assert!(res.summary.contains("-76.30"), "{}", res.summary);

    let res = r
        .invoke(
            &mut env.ctx(),
            "relative_energies",
            &args(json!({"outputs": ["water_opt"], "labels": ["w"]})),
        )
        .unwrap();
    assert!(res.summary.contains("w\t0.00 (most stable)"), "{}", res.summary);
}

#[test]
fn analysis_tool() {
    let r = ToolRegistry::with_builtins();
    let mut env = Env::new();
    let res = r
        .invoke(
            &mut env.ctx(),
            "analyze_energy_table",
            &args(json!({"analysis": {"kind": "pka", "delta_g": 30.09}})),
        )
        .unwrap();
    assert!(res.summary.contains("22.05"));
    let res = r
        .invoke(&mut env.ctx(), "analyze_energy_table", &args(json!({"analysis": {"kind": "ring-strain"}})))
        .unwrap();
    assert!(!res.ok);
}
