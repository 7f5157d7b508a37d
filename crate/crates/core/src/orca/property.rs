//! Named queries against a parsed output.

use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::output::ParsedOutput;

/// Query keys accepted by [`extract_property`].
pub const PROPERTY_KEYS: [&str; 8] = [
    "convergence_information",
    "TOTAL SCF ENERGY",
    "gibbs",
    "enthalpy",
    "frequencies",
    "charges",
    "dipole",
    "homo_lumo_gap",
];

#[derive(Debug, Error, PartialEq)]
#[error("unknown property key {0:?}; expected one of {keys}", keys = PROPERTY_KEYS.join(", "))]
pub struct UnknownProperty(pub String);

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Present(Value),
    Absent,
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Present(Value::String(s)) => f.write_str(s),
            PropertyValue::Present(v) => write!(f, "{v}"),
            PropertyValue::Absent => f.write_str("absent"),
        }
    }
}

fn present<T: Serialize>(v: Option<T>) -> PropertyValue {
    match v {
        Some(v) => PropertyValue::Present(serde_json::to_value(v).expect("serializable")),
        None => PropertyValue::Absent,
    }
}

pub fn extract_property(output: &ParsedOutput, key: &str) -> Result<PropertyValue, UnknownProperty> {
    let k = key.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    Ok(match k.as_str() {
        "convergence_information" | "convergence" => PropertyValue::Present(json!({
            "terminated_normally": output.terminated_normally,
            "scf_cycles": output.convergence.scf_cycles,
            "geometry_converged": output.convergence.geometry_converged,
        })),
        "total_scf_energy" | "scf_energy" | "final_single_point_energy" | "energy" => {
            present(output.scf_energy.as_ref())
        }
        "gibbs" | "gibbs_free_energy" | "final_gibbs_free_energy" => present(output.gibbs.as_ref()),
        "enthalpy" | "total_enthalpy" => present(output.enthalpy.as_ref()),
        "frequencies" => present(output.frequencies.as_ref()),
        "charges" => present(output.charges.as_ref()),
        "dipole" | "dipole_moment" => present(output.dipole.as_ref()),
        "homo_lumo_gap" => present(output.homo_lumo_gap),
        _ => return Err(UnknownProperty(key.to_string())),
    })
}
