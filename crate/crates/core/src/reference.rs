//! The bundled Ce(III) conformer workflow: seed geometries, calculation
//! specs and a solver model that regenerates the mock-engine fixtures.
//!
//! Geometries are synthetic Ce(NO3)3(H2O)3 arrangements (one per
//! conformer family); single-point energies are the tabulated ones.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::agent::SessionResult;
use crate::config::{Config, ExecKind, RunOptions};
use crate::exec::{normalize_input, FnEngine, JobRequest};
use crate::geometry::{parse_xyz, write_xyz, Atom, Molecule};
use crate::orca::synth::{reject_input, OutputBuilder};
use crate::orca::{BasisBlock, BlockEntry, CalcSpec, GeometryRef, KeywordCatalog, RunType};

/// Conformer family and the index in its generated file name.
pub const CONFORMERS: [(&str, u32); 5] = [
    ("cn9_YICLED", 0),
    ("tri_tri_mer_capped", 0),
    ("tricapped_trigonal_prismatic", 1),
    ("capped_square_antiprismatic_0", 0),
    ("capped_square_antiprismatic_1", 0),
];

const SP_TABLE: &str = include_str!("../data/ce_conformers_sp.csv");

/// Imaginary frequencies of successive optimization rounds; rounds past
/// the end of a chain come out clean.
fn imaginary_chain(conformer: &str) -> &'static [f64] {
    match conformer {
        "cn9_YICLED" => &[-131.99, -85.19],
        "capped_square_antiprismatic_1" => &[-81.23, -14.79],
        _ => &[],
    }
}

/// `<family>/<family>_<i>_nunpairedes_0_charge_0_xtb.xyz`; the
/// antiprismatic families already carry their index.
pub fn seed_xyz(conformer: &str) -> String {
    let (name, idx) = CONFORMERS.iter().find(|(c, _)| *c == conformer).copied().unwrap_or((conformer, 0));
    let stem = match name.strip_suffix("_0").or_else(|| name.strip_suffix("_1")) {
        Some(_) => name.to_string(),
        None => format!("{name}_{idx}"),
    };
    format!("{name}/{stem}_nunpairedes_0_charge_0_xtb.xyz")
}

pub fn sp_energy(conformer: &str) -> Option<&'static str> {
    SP_TABLE
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(','))
        .find(|(label, _)| *label == conformer)
        .map(|(_, e)| e.trim())
}

fn rotate(v: [f64; 3], yaw: f64, tilt: f64) -> [f64; 3] {
    let (s, c) = yaw.sin_cos();
    let v = [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
    let (s, c) = tilt.sin_cos();
    [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
}

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn add(a: [f64; 3], b: [f64; 3], k: f64) -> [f64; 3] {
    [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn round6(a: [f64; 3]) -> [f64; 3] {
    a.map(|x| (x * 1e6).round() / 1e6 + 0.0)
}

/// Ce with three bidentate nitrates and three waters (22 atoms).
pub fn seed_geometry(conformer: &str) -> Molecule {
    let k = CONFORMERS.iter().position(|(c, _)| *c == conformer).unwrap_or(0) as f64;
    let yaw = 0.35 * k;
    let tilt = 0.2 * k;
    let mut atoms = vec![Atom { element: "Ce".into(), position: [0.0; 3] }];
    let mut push = |e: &str, p: [f64; 3]| atoms.push(Atom { element: e.into(), position: round6(p) });
    for i in 0..3 {
        let phi = 2.0 * PI * i as f64 / 3.0 + 0.15 * k;
        let d = rotate(unit(PI / 2.0 + 0.3 * (k - 2.0) / 2.0, phi), yaw, tilt);
        let side = normalize(cross(d, [0.0, 0.0, 1.0]));
        push("N", add([0.0; 3], d, 2.98));
        push("O", add(add([0.0; 3], d, 2.40), side, 1.08));
        push("O", add(add([0.0; 3], d, 2.40), side, -1.08));
        push("O", add([0.0; 3], d, 4.20));
    }
    for i in 0..3 {
        let phi = 2.0 * PI * i as f64 / 3.0 + PI / 3.0 + 0.1 * k;
        let theta = if i == 0 { 0.25 + 0.1 * k } else { PI - 0.7 - 0.05 * k };
        let d = rotate(unit(theta, phi), yaw, tilt);
        let side = normalize(cross(d, [1.0, 0.0, 0.0]));
        let o = add([0.0; 3], d, 2.55);
        push("O", o);
        push("H", add(add(o, d, 0.59), side, 0.76));
        push("H", add(add(o, d, 0.59), side, -0.76));
    }
    Molecule::new(atoms, 0, 2).expect("valid geometry")
}

fn prints() -> Vec<String> {
    vec!["Print[ P_Basis ] 2".into(), "Print[ P_MOs ] 1".into(), "Print[P_hirshfeld] 1".into()]
}

/// The optimization spec as first generated: TightSCF and ConvCriteria
/// both sit in `%scf`, which the solver rejects one at a time.
pub fn opt_freq_spec() -> CalcSpec {
    CalcSpec {
        runtypes: RunType::parse_set("OPT_FREQ").expect("known run type"),
        functional: "PBE0".into(),
        basis: "def2-SVP".into(),
        dispersion: Some("D4".into()),
        approximations: vec!["RIJCOSX".into()],
        grid: Some("DEFGRID2".into()),
        scf_convergence: Some("TightSCF".into()),
        extra_keywords: vec![],
        maxcore: 4000,
        nprocs: 16,
        basis_block: Some(BasisBlock { basis: "def2-SVP".into(), ecp: Some("def2-ECP".into()) }),
        scf_block: vec![
            BlockEntry::new("AutotraH", "false"),
            BlockEntry::new("MaxIter", 500),
            BlockEntry::new("TightSCF", "true"),
            BlockEntry::new("ConvCriteria", "Tight"),
        ],
        geom_block: Some(vec![
            BlockEntry::new("MaxIter", 500),
            BlockEntry::new("coordsys", "redundant"),
            BlockEntry::new("cartfallback", "true"),
            BlockEntry::new("ReducePrint", "true"),
        ]),
        cpcm_block: None,
        tddft_block: None,
        output_prints: prints(),
        geometry: GeometryRef { charge: 0, multiplicity: 2, xyz_file: "input.xyz".into() },
    }
}

/// The single-point spec as first generated, with VV10 on the keyword line.
pub fn sp_spec() -> CalcSpec {
    CalcSpec {
        runtypes: vec![RunType::Sp],
        functional: "wB97M-V".into(),
        basis: "def2-SVPD".into(),
        dispersion: Some("VV10".into()),
        approximations: vec![],
        grid: None,
        basis_block: Some(BasisBlock { basis: "def2-SVPD".into(), ecp: Some("def2-ECP".into()) }),
        scf_block: vec![BlockEntry::new("AutotraH", "false"), BlockEntry::new("MaxIter", 500)],
        geom_block: None,
        ..opt_freq_spec()
    }
}

fn xyz_of(input: &str) -> Option<&str> {
    input
        .lines()
        .find(|l| l.trim_start().starts_with("* xyzfile"))
        .and_then(|l| l.split_whitespace().last())
}

/// Mass-weighted-looking mode that twists the water hydrogens.
fn twist_mode(mol: &Molecule) -> Vec<f64> {
    let mut v = vec![0.0; 3 * mol.len()];
    for (i, a) in mol.atoms.iter().enumerate() {
        if a.element == "H" {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            v[3 * i] = 0.25 * sign;
            v[3 * i + 1] = -0.18 * sign;
            v[3 * i + 2] = 0.12;
        }
    }
    v
}

fn frequencies(n: usize, imaginary: Option<f64>) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0..=5 => 0.0,
            6 => imaginary.unwrap_or(41.37),
            _ => (48.0 + 52.5 * (i - 6) as f64).min(3790.0) + (i % 7) as f64 * 0.31,
        })
        .map(|f: f64| (f * 100.0).round() / 100.0)
        .collect()
}

/// Solver output for one request of the reference workflow.
pub fn solve(req: &JobRequest, catalog: &KeywordCatalog) -> Result<String, String> {
    if let Some(err) = reject_input(&req.name, &req.input, catalog) {
        return Ok(err);
    }
    let (conformer, _) = CONFORMERS
        .iter()
        .filter(|(c, _)| req.name.starts_with(c))
        .max_by_key(|(c, _)| c.len())
        .ok_or_else(|| format!("{}: not part of the reference workflow", req.name))?;
    let xyz = xyz_of(&req.input).ok_or_else(|| format!("{}: no geometry line", req.name))?;
    let path = req.workdir.join(xyz);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mol = parse_xyz(&text).map_err(|e| e.to_string())?;
    let sp = sp_energy(conformer).ok_or_else(|| format!("{conformer}: no tabulated energy"))?;

    if req.input.starts_with("! SP") {
        return Ok(OutputBuilder::new(&req.name).coordinates(&mol).scf(17, sp).terminate());
    }
    let round = match req.name.rsplit_once("_removed") {
        None => 0,
        Some((_, "")) => 1,
        Some((_, n)) => n.parse::<usize>().map_err(|_| format!("{}: bad round", req.name))?,
    };
    let imaginary = imaginary_chain(conformer).get(round).copied();
    let n = 3 * mol.len();
    let mut modes = vec![Vec::new(); n];
    if imaginary.is_some() {
        modes[6] = twist_mode(&mol);
    }
    let e: f64 = sp.parse().map_err(|_| format!("{conformer}: bad energy"))?;
    let opt = format!("{:.8}", e + 0.61234567 - 0.00041 * round as f64);
    let h = format!("{:.8}", e + 0.61234567 + 0.31297);
    let g = format!("{:.8}", e + 0.61234567 + 0.22418);
    Ok(OutputBuilder::new(&req.name)
        .opt_cycle(1)
        .opt_cycle(2)
        .opt_converged()
        .coordinates(&mol)
        .scf(21, &opt)
        .frequencies(&frequencies(n, imaginary), &modes)
        .thermochemistry(&h, &g)
        .terminate())
}

/// Runs the workflow at `config` against [`solve`] and returns the result
/// with every distinct (job, input, output) submitted, in order.
pub fn record_run(config: &Config, session_root: &Path) -> Result<(SessionResult, Vec<(String, String, String)>), String> {
    let catalog = config.catalog().map_err(|e| e.to_string())?;
    let seen: Arc<Mutex<Vec<(String, String, String)>>> = Arc::default();
    let sink = seen.clone();
    let engine = FnEngine::new(move |req| {
        let out = solve(req, &catalog)?;
        let mut seen = sink.lock().expect("recorder lock");
        if !seen.iter().any(|(_, input, _)| normalize_input(input) == normalize_input(&req.input)) {
            seen.push((req.name.clone(), req.input.clone(), out.clone()));
        }
        Ok(out)
    });
    let opts = RunOptions {
        id: "reference".into(),
        session_root: session_root.to_path_buf(),
        exec: Some(ExecKind::Mock),
        ..Default::default()
    };
    let mut session = config.build_with(&opts, Box::new(engine)).map_err(|e| e.to_string())?;
    let result = session.run();
    let jobs = seen.lock().expect("recorder lock").clone();
    Ok((result, jobs))
}

/// Every generated file of a workflow directory, keyed by relative path:
/// seed geometries, seed specs and fixtures.
pub fn generate(workflow: &Path, scratch: &Path) -> Result<BTreeMap<PathBuf, String>, String> {
    let mut files = BTreeMap::new();
    for (c, _) in CONFORMERS {
        let rel = PathBuf::from("seed").join(seed_xyz(c));
        files.insert(rel, write_xyz(&seed_geometry(c), &format!("{c} Ce(NO3)3(H2O)3")));
    }
    let json = |s: &CalcSpec| serde_json::to_string_pretty(s).expect("specs serialize") + "\n";
    files.insert(PathBuf::from("seed/specs/opt_freq.json"), json(&opt_freq_spec()));
    files.insert(PathBuf::from("seed/specs/sp.json"), json(&sp_spec()));

    // run against a scratch copy so the seed written above is the one used
    let wf = scratch.join("wf");
    for entry in walkdir::WalkDir::new(workflow).sort_by_file_name() {
        let entry = entry.map_err(|e| e.to_string())?;
        let rel = entry.path().strip_prefix(workflow).expect("under root");
        if rel.starts_with("seed") || rel.starts_with("fixtures") {
            continue;
        }
        let dest = wf.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| e.to_string())?;
        } else {
            std::fs::copy(entry.path(), &dest).map_err(|e| e.to_string())?;
        }
    }
    for (rel, text) in &files {
        let p = wf.join(rel);
        std::fs::create_dir_all(p.parent().expect("has parent")).map_err(|e| e.to_string())?;
        std::fs::write(&p, text).map_err(|e| e.to_string())?;
    }
    let config = Config::load(&wf.join("config.toml")).map_err(|e| e.to_string())?;
    let (result, jobs) = record_run(&config, &scratch.join("session"))?;
    if result.status != crate::agent::SessionState::Done {
        return Err(format!("reference run ended {:?}: {:?}", result.status, result.final_response));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (name, input, output) in jobs {
        let n = counts.entry(name.clone()).or_insert(0);
        *n += 1;
        let stem = format!("fixtures/{name}.{n}");
        files.insert(PathBuf::from(format!("{stem}.inp")), input);
        files.insert(PathBuf::from(format!("{stem}.out")), output);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_names_follow_the_generator_pattern() {
        assert_eq!(seed_xyz("cn9_YICLED"), "cn9_YICLED/cn9_YICLED_0_nunpairedes_0_charge_0_xtb.xyz");
        assert_eq!(
            seed_xyz("tricapped_trigonal_prismatic"),
            "tricapped_trigonal_prismatic/tricapped_trigonal_prismatic_1_nunpairedes_0_charge_0_xtb.xyz"
        );
        assert_eq!(
            seed_xyz("capped_square_antiprismatic_1"),
            "capped_square_antiprismatic_1/capped_square_antiprismatic_1_nunpairedes_0_charge_0_xtb.xyz"
        );
    }

    #[test]
    fn seed_geometry_is_a_22_atom_complex() {
        for (c, _) in CONFORMERS {
            let m = seed_geometry(c);
            assert_eq!(m.len(), 22);
            assert_eq!(m.formula(), seed_geometry("cn9_YICLED").formula());
            for (i, a) in m.atoms.iter().enumerate() {
                for b in &m.atoms[i + 1..] {
                    let d: f64 = (0..3).map(|k| (a.position[k] - b.position[k]).powi(2)).sum::<f64>().sqrt();
                    assert!(d > 0.7, "{c}: atoms too close ({d})");
                }
            }
        }
        assert_eq!(sp_energy("capped_square_antiprismatic_0"), Some("-1544.53720655504048"));
    }
}
