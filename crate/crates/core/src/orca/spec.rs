//! Typed calculation specs and their byte-stable input rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RunType {
    #[serde(rename = "OPT")]
    Opt,
    #[serde(rename = "FREQ")]
    Freq,
    #[serde(rename = "SP")]
    Sp,
}

impl RunType {
    pub fn token(self) -> &'static str {
        match self {
            RunType::Opt => "OPT",
            RunType::Freq => "FREQ",
            RunType::Sp => "SP",
        }
    }

    /// Parses `OPT`, `FREQ`, `SP` or the combined `OPT_FREQ`.
    pub fn parse_set(token: &str) -> Option<Vec<RunType>> {
        match token.to_ascii_uppercase().as_str() {
            "OPT" => Some(vec![RunType::Opt]),
            "FREQ" => Some(vec![RunType::Freq]),
            "SP" => Some(vec![RunType::Sp]),
            "OPT_FREQ" => Some(vec![RunType::Opt, RunType::Freq]),
            _ => None,
        }
    }
}

/// One `identifier value` line inside a `%block`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub key: String,
    pub value: String,
}

impl BlockEntry {
    pub fn new(key: &str, value: impl ToString) -> Self {
        Self {
            key: key.to_string(),
            value: value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisBlock {
    pub basis: String,
    pub ecp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TddftBlock {
    pub nroots: u32,
    pub triplets: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryRef {
    pub charge: i32,
    pub multiplicity: u32,
    pub xyz_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalcSpec {
    pub runtypes: Vec<RunType>,
    pub functional: String,
    pub basis: String,
    #[serde(default)]
    pub dispersion: Option<String>,
    #[serde(default)]
    pub approximations: Vec<String>,
    #[serde(default)]
    pub grid: Option<String>,
    #[serde(default)]
    pub scf_convergence: Option<String>,
    /// Further keyword-line tokens, rendered last.
    #[serde(default)]
    pub extra_keywords: Vec<String>,
    pub maxcore: u32,
    pub nprocs: u32,
    #[serde(default)]
    pub basis_block: Option<BasisBlock>,
    #[serde(default)]
    pub scf_block: Vec<BlockEntry>,
    #[serde(default)]
    pub geom_block: Option<Vec<BlockEntry>>,
    /// Solvent name for implicit solvation.
    #[serde(default)]
    pub cpcm_block: Option<String>,
    #[serde(default)]
    pub tddft_block: Option<TddftBlock>,
    #[serde(default)]
    pub output_prints: Vec<String>,
    pub geometry: GeometryRef,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("no run type given")]
    NoRunType,
    #[error("SP cannot be combined with OPT in one input")]
    SpWithOpt,
    #[error("{field} must not be empty")]
    Empty { field: &'static str },
    #[error("{field} token {token:?} contains whitespace")]
    Whitespace { field: &'static str, token: String },
    #[error("{field} must be at least 1")]
    Zero { field: &'static str },
}

fn token_ok(field: &'static str, token: &str) -> Result<(), SpecError> {
    if token.is_empty() {
        return Err(SpecError::Empty { field });
    }
    if token.chars().any(char::is_whitespace) {
        return Err(SpecError::Whitespace {
            field,
            token: token.to_string(),
        });
    }
    Ok(())
}

impl CalcSpec {
    /// A bare single point: `SP HF def2-SVP`, one core.
    pub fn minimal(xyz_file: &str) -> Self {
        Self {
            runtypes: vec![RunType::Sp],
            functional: "HF".into(),
            basis: "def2-SVP".into(),
            dispersion: None,
            approximations: Vec::new(),
            grid: None,
            scf_convergence: None,
            extra_keywords: Vec::new(),
            maxcore: 4000,
            nprocs: 1,
            basis_block: None,
            scf_block: Vec::new(),
            geom_block: None,
            cpcm_block: None,
            tddft_block: None,
            output_prints: Vec::new(),
            geometry: GeometryRef {
                charge: 0,
                multiplicity: 1,
                xyz_file: xyz_file.into(),
            },
        }
    }

    /// Structural checks that rendering depends on. Catalog conformance is
    /// a separate step, see [`super::validate_spec`].
    pub fn check(&self) -> Result<(), SpecError> {
        if self.runtypes.is_empty() {
            return Err(SpecError::NoRunType);
        }
        if self.runtypes.contains(&RunType::Sp) && self.runtypes.contains(&RunType::Opt) {
            return Err(SpecError::SpWithOpt);
        }
        token_ok("functional", &self.functional)?;
        token_ok("basis", &self.basis)?;
        for t in self.keyword_tokens() {
            token_ok("keyword", &t)?;
        }
        for e in self.block_entries() {
            token_ok("block identifier", &e.1.key)?;
        }
        token_ok("xyz file", &self.geometry.xyz_file)?;
        if self.maxcore == 0 {
            return Err(SpecError::Zero { field: "maxcore" });
        }
        if self.nprocs == 0 {
            return Err(SpecError::Zero { field: "nprocs" });
        }
        if self.geometry.multiplicity == 0 {
            return Err(SpecError::Zero {
                field: "multiplicity",
            });
        }
        Ok(())
    }

    /// Keyword-line tokens in render order.
    pub fn keyword_tokens(&self) -> Vec<String> {
        let mut runtypes = self.runtypes.clone();
        runtypes.sort();
        runtypes.dedup();
        let mut out: Vec<String> = runtypes.iter().map(|r| r.token().to_string()).collect();
        out.push(self.functional.clone());
        out.push(self.basis.clone());
        out.extend(self.dispersion.iter().cloned());
        out.extend(self.approximations.iter().cloned());
        out.extend(self.grid.iter().cloned());
        out.extend(self.scf_convergence.iter().cloned());
        out.extend(self.extra_keywords.iter().cloned());
        if self.cpcm_block.is_some() && !out.iter().any(|t| t.eq_ignore_ascii_case("CPCM")) {
            out.push("CPCM".into());
        }
        out
    }

    /// `(block name, entry)` for every identifier line the spec will render.
    pub fn block_entries(&self) -> Vec<(&'static str, BlockEntry)> {
        let mut out = Vec::new();
        out.push(("pal", BlockEntry::new("nprocs", self.nprocs)));
        if let Some(b) = &self.basis_block {
            out.push(("basis", BlockEntry::new("Basis", format!("\"{}\"", b.basis))));
            if let Some(ecp) = &b.ecp {
                out.push(("basis", BlockEntry::new("ECP", format!("\"{ecp}\""))));
            }
        }
        out.extend(self.scf_block.iter().map(|e| ("scf", e.clone())));
        if let Some(g) = &self.geom_block {
            out.extend(g.iter().map(|e| ("geom", e.clone())));
        }
        if let Some(solvent) = &self.cpcm_block {
            out.push(("cpcm", BlockEntry::new("SMD", "true")));
            out.push(("cpcm", BlockEntry::new("SMDsolvent", format!("\"{solvent}\""))));
        }
        if let Some(t) = &self.tddft_block {
            out.push(("tddft", BlockEntry::new("NRoots", t.nroots)));
            out.push(("tddft", BlockEntry::new("Triplets", t.triplets)));
        }
        out
    }

    /// Same spec pointing at a different geometry file.
    pub fn with_xyz(&self, xyz_file: &str) -> Self {
        let mut s = self.clone();
        s.geometry.xyz_file = xyz_file.to_string();
        s
    }

    pub fn is_frequency_job(&self) -> bool {
        self.runtypes.contains(&RunType::Freq)
    }
}

fn block(out: &mut String, name: &str, entries: &[BlockEntry]) {
    let _ = writeln!(out, "%{name}");
    for e in entries {
        if e.value.is_empty() {
            let _ = writeln!(out, "  {}", e.key);
        } else {
            let _ = writeln!(out, "  {} {}", e.key, e.value);
        }
    }
    out.push_str("end\n");
}

/// Renders the input text. `%scf` is always present; `%output` only when
/// print directives are set.
pub fn render_input(spec: &CalcSpec) -> Result<String, SpecError> {
    spec.check()?;
    let mut out = String::new();
    let _ = writeln!(out, "! {}", spec.keyword_tokens().join(" "));
    let _ = writeln!(out, "%maxcore {}", spec.maxcore);

    let entries = spec.block_entries();
    let of = |name: &str| -> Vec<BlockEntry> {
        entries
            .iter()
            .filter(|(b, _)| *b == name)
            .map(|(_, e)| e.clone())
            .collect()
    };
    block(&mut out, "pal", &of("pal"));
    if spec.basis_block.is_some() {
        block(&mut out, "basis", &of("basis"));
    }
    block(&mut out, "scf", &of("scf"));
    if spec.geom_block.is_some() {
        block(&mut out, "geom", &of("geom"));
    }
    if spec.cpcm_block.is_some() {
        block(&mut out, "cpcm", &of("cpcm"));
    }
    if spec.tddft_block.is_some() {
        block(&mut out, "tddft", &of("tddft"));
    }
    if !spec.output_prints.is_empty() {
        out.push_str("%output\n");
        for p in &spec.output_prints {
            let _ = writeln!(out, "{p}");
        }
        out.push_str("end\n");
    }
    let g = &spec.geometry;
    let _ = writeln!(out, "* xyzfile {} {} {}", g.charge, g.multiplicity, g.xyz_file);
    Ok(out)
}
