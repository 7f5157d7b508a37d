//! Solver output parsing. Section headers follow the solver's own layout so
//! the same code reads fixtures and genuine outputs.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::validate::Location;
use crate::energy::Decimal;
use crate::geometry::{canonical_element, Atom, Molecule, NormalMode};

pub const NORMAL_TERMINATION: &str = "****ORCA TERMINATED NORMALLY****";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDiagnosis {
    pub location: Location,
    pub offending_token: String,
    pub raw_message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Charges {
    pub mulliken: Option<Vec<f64>>,
    pub loewdin: Option<Vec<f64>>,
    pub hirshfeld: Option<Vec<f64>>,
}

impl Charges {
    fn is_empty(&self) -> bool {
        self.mulliken.is_none() && self.loewdin.is_none() && self.hirshfeld.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Convergence {
    pub scf_cycles: Option<u32>,
    /// `None` when no optimization ran.
    pub geometry_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub terminated_normally: bool,
    pub scf_energy: Option<Decimal>,
    pub enthalpy: Option<Decimal>,
    pub gibbs: Option<Decimal>,
    /// Debye
    pub dipole: Option<Decimal>,
    /// eV
    pub homo_lumo_gap: Option<f64>,
    pub charges: Option<Charges>,
    /// cm⁻¹, indexed by mode number
    pub frequencies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub normal_modes: Vec<NormalMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_geometry: Option<Molecule>,
    pub convergence: Convergence,
    pub error: Option<ErrorDiagnosis>,
}

impl ParsedOutput {
    pub fn mode(&self, index: usize) -> Option<&NormalMode> {
        self.normal_modes.iter().find(|m| m.index == index)
    }
}

fn last_number(line: &str) -> Option<&str> {
    line.split_whitespace()
        .rev()
        .find(|t| t.parse::<f64>().is_ok())
}

fn last_decimal(lines: &[&str], marker: &str) -> Option<Decimal> {
    lines
        .iter()
        .rev()
        .find(|l| l.contains(marker))
        .and_then(|l| last_number(l))
        .and_then(|t| t.parse().ok())
}

/// Index of the line after the last occurrence of `header`.
fn after_last(lines: &[&str], header: &str) -> Option<usize> {
    lines
        .iter()
        .rposition(|l| l.trim_start().starts_with(header))
        .map(|i| i + 1)
}

fn is_rule(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && t.chars().all(|c| c == '-')
}

fn atomic_charges(lines: &[&str], header: &str) -> Option<Vec<f64>> {
    let start = after_last(lines, header)?;
    let mut out = Vec::new();
    for line in lines[start..].iter().skip_while(|l| is_rule(l)) {
        let Some((left, right)) = line.split_once(':') else { break };
        if left.split_whitespace().next().and_then(|t| t.parse::<usize>().ok()).is_none() {
            break;
        }
        let Some(value) = right.split_whitespace().next().and_then(|t| t.parse().ok()) else {
            break;
        };
        out.push(value);
    }
    (!out.is_empty()).then_some(out)
}

fn hirshfeld_charges(lines: &[&str]) -> Option<Vec<f64>> {
    let start = after_last(lines, "HIRSHFELD ANALYSIS")?;
    let header = lines[start..]
        .iter()
        .position(|l| l.trim_start().starts_with("ATOM") && l.contains("CHARGE"))?;
    let mut out = Vec::new();
    for line in &lines[start + header + 1..] {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            [idx, _el, charge, ..] if idx.parse::<usize>().is_ok() => match charge.parse() {
                Ok(v) => out.push(v),
                Err(_) => break,
            },
            _ => break,
        }
    }
    (!out.is_empty()).then_some(out)
}

fn frequencies(lines: &[&str]) -> Option<Vec<f64>> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^\s*(\d+):\s+(-?\d+\.\d+)\s+cm\*\*-1").unwrap());
    let start = after_last(lines, "VIBRATIONAL FREQUENCIES")?;
    let mut out: Vec<f64> = Vec::new();
    let mut started = false;
    for line in &lines[start..] {
        if let Some(c) = re.captures(line) {
            started = true;
            let idx: usize = c[1].parse().ok()?;
            if idx != out.len() {
                return None;
            }
            out.push(c[2].parse().ok()?);
        } else if started {
            break;
        }
    }
    started.then_some(out)
}

fn normal_modes(lines: &[&str], freqs: &[f64]) -> Vec<NormalMode> {
    let Some(start) = after_last(lines, "NORMAL MODES") else {
        return Vec::new();
    };
    let n_coords = freqs.len();
    let mut columns: Vec<Vec<f64>> = vec![vec![0.0; n_coords]; freqs.len()];
    let mut header: Vec<usize> = Vec::new();
    let mut data_seen = false;
    for line in lines[start..].iter().skip_while(|l| is_rule(l)) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let ints: Option<Vec<usize>> = tokens.iter().map(|t| t.parse().ok()).collect();
        if let Some(ints) = ints {
            header = ints;
            continue;
        }
        let row: Option<usize> = tokens[0].parse().ok();
        let values: Option<Vec<f64>> = tokens[1..].iter().map(|t| t.parse().ok()).collect();
        match (row, values) {
            (Some(r), Some(v)) if !header.is_empty() && v.len() == header.len() => {
                data_seen = true;
                for (col, value) in header.iter().zip(v) {
                    if *col < columns.len() && r < n_coords {
                        columns[*col][r] = value;
                    }
                }
            }
            _ if data_seen => break,
            _ => {}
        }
    }
    if !data_seen || n_coords % 3 != 0 {
        return Vec::new();
    }
    columns
        .into_iter()
        .enumerate()
        .map(|(index, col)| NormalMode {
            index,
            frequency: freqs[index],
            displacement: col.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
        .collect()
}

fn final_geometry(lines: &[&str]) -> Option<Molecule> {
    let start = after_last(lines, "CARTESIAN COORDINATES (ANGSTROEM)")?;
    let mut atoms = Vec::new();
    for line in lines[start..].iter().skip_while(|l| is_rule(l)) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [el, x, y, z] = f.as_slice() else { break };
        let (Some(element), Ok(x), Ok(y), Ok(z)) =
            (canonical_element(el), x.parse(), y.parse(), z.parse())
        else {
            break;
        };
        atoms.push(Atom {
            element: element.to_string(),
            position: [x, y, z],
        });
    }
    if atoms.is_empty() {
        return None;
    }
    Molecule::new(atoms, 0, 1).ok()
}

fn homo_lumo_gap(lines: &[&str]) -> Option<f64> {
    let start = after_last(lines, "ORBITAL ENERGIES")?;
    let mut homo: Option<f64> = None;
    let mut lumo: Option<f64> = None;
    let mut started = false;
    for line in &lines[start..] {
        let f: Vec<&str> = line.split_whitespace().collect();
        if let [no, occ, _eh, ev] = f.as_slice() {
            if let (Ok(_), Ok(occ), Ok(ev)) =
                (no.parse::<usize>(), occ.parse::<f64>(), ev.parse::<f64>())
            {
                started = true;
                if occ > 0.0 {
                    homo = Some(ev);
                } else if lumo.is_none() {
                    lumo = Some(ev);
                }
                continue;
            }
        }
        if started && (f.is_empty() || lumo.is_some()) {
            break;
        }
    }
    Some(lumo? - homo?)
}

fn diagnose(lines: &[&str]) -> Option<ErrorDiagnosis> {
    static BLOCK: OnceLock<Regex> = OnceLock::new();
    static LAST: OnceLock<Regex> = OnceLock::new();
    let block = BLOCK.get_or_init(|| Regex::new(r"Unknown identifier in (\w+) block").unwrap());
    let last = LAST.get_or_init(|| Regex::new(r"Last token:\s*(\S+?)\.?\s*$").unwrap());

    for (i, line) in lines.iter().enumerate() {
        if let Some(c) = block.captures(line) {
            let (tail_i, token) = lines[i..]
                .iter()
                .enumerate()
                .find_map(|(k, l)| last.captures(l).map(|c| (i + k, c[1].to_string())))
                .unwrap_or((i, String::new()));
            let raw = lines[i..=tail_i]
                .iter()
                .map(|l| l.trim())
                .collect::<Vec<_>>()
                .join("\n");
            let location = if token.is_empty() {
                Location::Unknown
            } else {
                Location::Block(c[1].to_ascii_lowercase())
            };
            let raw = raw
                .find("Unknown identifier")
                .map(|p| raw[p..].to_string())
                .unwrap_or(raw);
            return Some(ErrorDiagnosis {
                location,
                offending_token: token.to_ascii_uppercase(),
                raw_message: raw,
            });
        }
        if line.contains("UNRECOGNIZED OR DUPLICATED KEYWORD(S) IN SIMPLE INPUT LINE") {
            let next = lines[i + 1..]
                .iter()
                .position(|l| !l.trim().is_empty())
                .map(|k| i + 1 + k);
            let token = next
                .and_then(|k| lines[k].split_whitespace().next())
                .unwrap_or("")
                .to_string();
            let end = next.unwrap_or(i);
            let raw = lines[i..=end]
                .iter()
                .map(|l| l.trim())
                .collect::<Vec<_>>()
                .join("\n");
            let location = if token.is_empty() {
                Location::Unknown
            } else {
                Location::KeywordLine
            };
            return Some(ErrorDiagnosis {
                location,
                offending_token: token.to_ascii_uppercase(),
                raw_message: raw,
            });
        }
    }
    let first = lines.iter().position(|l| {
        let u = l.to_ascii_uppercase();
        u.contains("ERROR") || u.contains("ABORTING")
    })?;
    let raw = lines[first..]
        .iter()
        .take(6)
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Some(ErrorDiagnosis {
        location: Location::Unknown,
        offending_token: String::new(),
        raw_message: raw,
    })
}

/// Extracts every recognised section; absent sections stay `None`.
pub fn parse_output(text: &str) -> ParsedOutput {
    let lines: Vec<&str> = text.lines().collect();
    let terminated_normally = text.contains(NORMAL_TERMINATION);

    static SCF: OnceLock<Regex> = OnceLock::new();
    let scf_re = SCF.get_or_init(|| Regex::new(r"SCF CONVERGED AFTER\s+(\d+)\s+CYCLES").unwrap());
    let scf_cycles = lines
        .iter()
        .rev()
        .find_map(|l| scf_re.captures(l).and_then(|c| c[1].parse().ok()));
    let geometry_converged = if text.contains("THE OPTIMIZATION HAS CONVERGED") {
        Some(true)
    } else if text.contains("GEOMETRY OPTIMIZATION CYCLE") {
        Some(false)
    } else {
        None
    };

    let freqs = frequencies(&lines);
    let normal_modes = freqs
        .as_deref()
        .map(|f| normal_modes(&lines, f))
        .unwrap_or_default();
    let charges = Charges {
        mulliken: atomic_charges(&lines, "MULLIKEN ATOMIC CHARGES"),
        loewdin: atomic_charges(&lines, "LOEWDIN ATOMIC CHARGES"),
        hirshfeld: hirshfeld_charges(&lines),
    };

    ParsedOutput {
        terminated_normally,
        scf_energy: last_decimal(&lines, "FINAL SINGLE POINT ENERGY"),
        enthalpy: last_decimal(&lines, "Total Enthalpy"),
        gibbs: last_decimal(&lines, "Final Gibbs free energy"),
        dipole: last_decimal(&lines, "Magnitude (Debye)"),
        homo_lumo_gap: homo_lumo_gap(&lines),
        charges: (!charges.is_empty()).then_some(charges),
        frequencies: freqs,
        normal_modes,
        final_geometry: final_geometry(&lines),
        convergence: Convergence {
            scf_cycles,
            geometry_converged,
        },
        error: if terminated_normally { None } else { diagnose(&lines) },
    }
}
