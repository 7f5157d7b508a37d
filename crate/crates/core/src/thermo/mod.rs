//! Post-analysis thermochemistry: unit conversion, reaction energetics, pKa
//! from deprotonation free energies, proton-solvation calibration, ring
//! strain accumulated through isodesmic methyl-transfer reactions, and
//! conformer ranking.
//!
//! Energies enter in hartree and leave in kcal/mol. Every function takes a
//! [`Constants`] so sensitivity runs can override the conversion factors.

pub mod analysis;
mod report;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    calibration_report, conformer_report, reaction_report, ring_strain_report, CalibrationRow,
    ReportTable,
};
pub use table::{EnergyTable, TableError};

use crate::energy::Decimal;

/// Aqueous proton free energy (Eh) consistent with a 30.09 kcal/mol
/// deprotonation free energy for acetic acid at B3LYP/6-31G*/CPCM.
pub const DEFAULT_AQUEOUS_PROTON_G: f64 = -0.423_736_774_723_370_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// kcal·mol⁻¹ per hartree
    pub hartree_to_kcal: f64,
    /// kcal·mol⁻¹·K⁻¹
    pub gas_constant: f64,
    /// K
    pub temperature: f64,
    pub ln10: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hartree_to_kcal: 627.5095,
            gas_constant: 1.987204e-3,
            temperature: 298.15,
            ln10: 2.303,
        }
    }
}

impl Constants {
    /// ln(10)·R·T in kcal/mol.
    pub fn pka_denominator(&self) -> f64 {
        self.ln10 * self.gas_constant * self.temperature
    }

    pub fn to_kcal(&self, hartree: f64) -> f64 {
        hartree * self.hartree_to_kcal
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ThermoError {
    #[error("no record labelled {0:?}")]
    MissingLabel(String),
    #[error("record {label:?} has no {property} value")]
    MissingProperty { label: String, property: Property },
    #[error("stoichiometric coefficient for {0:?} must be a positive integer")]
    BadCoefficient(String),
    #[error("at least one reference is required")]
    EmptyReferences,
    #[error("no corrections supplied")]
    EmptyCorrections,
    #[error("no conformers supplied")]
    EmptyConformers,
    #[error("ring series is empty")]
    EmptySeries,
    #[error("ring series has a gap at n = {0}")]
    SeriesGap(u32),
    #[error("reference ring size {reference} is outside the covered range {low}..={high}")]
    ReferenceOutOfRange { reference: u32, low: u32, high: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(alias = "e", alias = "energy")]
    E,
    #[serde(alias = "h", alias = "enthalpy")]
    H,
    #[serde(alias = "g", alias = "gibbs")]
    G,
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Property::E => "E",
            Property::H => "H",
            Property::G => "G",
        })
    }
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "energy" | "scf" => Ok(Property::E),
            "h" | "enthalpy" => Ok(Property::H),
            "g" | "gibbs" => Ok(Property::G),
            other => Err(format!("unknown property {other:?} (expected E, H or G)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoRecord {
    pub label: String,
    pub electronic_energy: Option<Decimal>,
    pub enthalpy: Option<Decimal>,
    pub gibbs: Option<Decimal>,
}

impl ThermoRecord {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            electronic_energy: None,
            enthalpy: None,
            gibbs: None,
        }
    }

    pub fn with(mut self, property: Property, value: &str) -> Self {
        let v = value.parse().ok();
        match property {
            Property::E => self.electronic_energy = v,
            Property::H => self.enthalpy = v,
            Property::G => self.gibbs = v,
        }
        self
    }

    pub fn get(&self, property: Property) -> Result<f64, ThermoError> {
        let slot = match property {
            Property::E => &self.electronic_energy,
            Property::H => &self.enthalpy,
            Property::G => &self.gibbs,
        };
        slot.as_ref()
            .map(Decimal::value)
            .ok_or_else(|| ThermoError::MissingProperty {
                label: self.label.clone(),
                property,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub reactants: Vec<(String, u32)>,
    pub products: Vec<(String, u32)>,
}

impl Reaction {
    pub fn simple(reactant: &str, product: &str) -> Self {
        Self {
            reactants: vec![(reactant.to_string(), 1)],
            products: vec![(product.to_string(), 1)],
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            reactants: self.products.clone(),
            products: self.reactants.clone(),
        }
    }
}

pub fn hartree_to_kcal(x: f64) -> f64 {
    Constants::default().to_kcal(x)
}

/// Σ products − Σ reactants of `property`, in kcal/mol.
pub fn reaction_delta(
    table: &EnergyTable,
    reaction: &Reaction,
    property: Property,
    constants: &Constants,
) -> Result<f64, ThermoError> {
    let side = |terms: &[(String, u32)]| -> Result<f64, ThermoError> {
        terms.iter().try_fold(0.0, |acc, (label, coef)| {
            if *coef == 0 {
                return Err(ThermoError::BadCoefficient(label.clone()));
            }
            let record = table
                .get(label)
                .ok_or_else(|| ThermoError::MissingLabel(label.clone()))?;
            Ok(acc + f64::from(*coef) * record.get(property)?)
        })
    };
    let delta = side(&reaction.products)? - side(&reaction.reactants)?;
    Ok(constants.to_kcal(delta))
}

pub fn pka_from_delta_g(delta_g_kcal: f64, constants: &Constants) -> f64 {
    delta_g_kcal / constants.pka_denominator()
}

/// ΔG of HA → A⁻ + H⁺ in kcal/mol from Gibbs energies in hartree.
pub fn deprotonation_delta_g(
    g_acid: f64,
    g_anion: f64,
    g_proton: f64,
    constants: &Constants,
) -> f64 {
    constants.to_kcal(g_anion + g_proton - g_acid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub corrections: Vec<f64>,
    pub mean: f64,
}

/// Per-reference proton-solvation corrections from `(ΔG_raw, pKa_exp)` pairs.
pub fn calibrate_proton_correction(
    refs: &[(f64, f64)],
    constants: &Constants,
) -> Result<Calibration, ThermoError> {
    if refs.is_empty() {
        return Err(ThermoError::EmptyReferences);
    }
    let den = constants.pka_denominator();
    let corrections: Vec<f64> = refs
        .iter()
        .map(|(dg_raw, pka_exp)| pka_exp * den - dg_raw)
        .collect();
    let mean = corrections.iter().sum::<f64>() / corrections.len() as f64;
    Ok(Calibration { corrections, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub per_reference: Vec<f64>,
    pub mean: f64,
}

pub fn predict_pka(
    delta_g_raw_target: f64,
    corrections: &[f64],
    constants: &Constants,
) -> Result<Prediction, ThermoError> {
    if corrections.is_empty() {
        return Err(ThermoError::EmptyCorrections);
    }
    let den = constants.pka_denominator();
    let per_reference: Vec<f64> = corrections
        .iter()
        .map(|c| (delta_g_raw_target + c) / den)
        .collect();
    let mean = per_reference.iter().sum::<f64>() / per_reference.len() as f64;
    Ok(Prediction {
        per_reference,
        mean,
    })
}

/// Records for one isodesmic step: cyclo(CnH2n) → methylcyclo(n−1).
#[derive(Debug, Clone, PartialEq)]
pub struct RingPair {
    pub cyclo: ThermoRecord,
    pub methyl_smaller: ThermoRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingStrain {
    /// Δ(n) = X(methylcyclo(n−1)) − X(cyclo(n)), kcal/mol.
    pub reaction_deltas: BTreeMap<u32, f64>,
    /// Strain of each ring size relative to the reference, kcal/mol.
    pub strain: BTreeMap<u32, f64>,
}

/// Accumulates ring strain from the reference outwards: downward with
/// strain(n−1) = Δ(n) + strain(n), upward with strain(n) = strain(n−1) − Δ(n).
/// A series over n ∈ [lo, hi] covers ring sizes lo−1 ..= hi.
pub fn ring_strain(
    series: &BTreeMap<u32, RingPair>,
    reference: u32,
    property: Property,
    constants: &Constants,
) -> Result<RingStrain, ThermoError> {
    let (&lo, &hi) = match (series.keys().next(), series.keys().next_back()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(ThermoError::EmptySeries),
    };
    if let Some(gap) = (lo..=hi).find(|n| !series.contains_key(n)) {
        return Err(ThermoError::SeriesGap(gap));
    }
    if lo == 0 || reference < lo - 1 || reference > hi {
        return Err(ThermoError::ReferenceOutOfRange {
            reference,
            low: lo.saturating_sub(1),
            high: hi,
        });
    }

    let mut reaction_deltas = BTreeMap::new();
    for (&n, pair) in series {
        let delta = pair.methyl_smaller.get(property)? - pair.cyclo.get(property)?;
        reaction_deltas.insert(n, constants.to_kcal(delta));
    }

    let mut strain = BTreeMap::new();
    strain.insert(reference, 0.0);
    let mut current = 0.0;
    for n in (lo..=reference).rev() {
        current += reaction_deltas[&n];
        strain.insert(n - 1, current);
    }
    current = 0.0;
    for n in (reference + 1)..=hi {
        current -= reaction_deltas[&n];
        strain.insert(n, current);
    }
    Ok(RingStrain {
        reaction_deltas,
        strain,
    })
}

/// Energies relative to the lowest, in kcal/mol, in input order.
pub fn relative_energies(
    conformers: &[(String, f64)],
    constants: &Constants,
) -> Result<Vec<(String, f64)>, ThermoError> {
    let min = conformers
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    if conformers.is_empty() {
        return Err(ThermoError::EmptyConformers);
    }
    Ok(conformers
        .iter()
        .map(|(label, v)| (label.clone(), constants.to_kcal(v - min)))
        .collect())
}

/// Label of the lowest-energy conformer (first one on ties).
pub fn most_stable(conformers: &[(String, f64)]) -> Option<&str> {
    conformers
        .iter()
        .fold(None::<&(String, f64)>, |best, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .map(|(label, _)| label.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c() -> Constants {
        Constants::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn conversion() {
        assert_eq!(hartree_to_kcal(1.0), 627.5095);
        assert_eq!(hartree_to_kcal(0.0), 0.0);
        assert!(close(hartree_to_kcal(0.00037554), 0.2357, 5e-5));
    }

    fn cyclobutane_table() -> EnergyTable {
        EnergyTable::from_records(vec![
            ThermoRecord::new("cyclobutane")
                .with(Property::H, "-156.97750588")
                .with(Property::G, "-157.00875190"),
            ThermoRecord::new("methylcyclopropane")
                .with(Property::H, "-156.97713034")
                .with(Property::G, "-157.00924107"),
        ])
    }

    #[test]
    fn cyclobutane_isomerization() {
        let t = cyclobutane_table();
        let r = Reaction::simple("cyclobutane", "methylcyclopropane");
        let dh = reaction_delta(&t, &r, Property::H, &c()).unwrap();
        let dg = reaction_delta(&t, &r, Property::G, &c()).unwrap();
        assert!(close(dh, 0.236, 5e-4), "{dh}");
        assert!(close(dg, -0.307, 5e-4), "{dg}");
        let id = Reaction::simple("cyclobutane", "cyclobutane");
        assert_eq!(reaction_delta(&t, &id, Property::H, &c()).unwrap(), 0.0);
    }

    #[test]
    fn reaction_errors_name_the_problem() {
        let t = cyclobutane_table();
        let r = Reaction::simple("cyclobutane", "ghost");
        assert_eq!(
            reaction_delta(&t, &r, Property::H, &c()),
            Err(ThermoError::MissingLabel("ghost".into()))
        );
        let r = Reaction::simple("cyclobutane", "methylcyclopropane");
        assert!(matches!(
            reaction_delta(&t, &r, Property::E, &c()),
            Err(ThermoError::MissingProperty { property: Property::E, .. })
        ));
    }

    #[test]
    fn pka_denominator_oracle() {
        // ln10 · R · T written out independently
        let den = 2.303 * 1.987204e-3 * 298.15;
        assert_eq!(c().pka_denominator(), den);
        assert!(close(pka_from_delta_g(30.09, &c()), 22.05, 0.01));
        assert_eq!(pka_from_delta_g(0.0, &c()), 0.0);
        assert!(close(pka_from_delta_g(1.36437, &c()), 1.000, 5e-4));
    }

    #[test]
    fn deprotonation_free_energies() {
        let gp = -1.09744548;
        let acetic = deprotonation_delta_g(-228.93401544, -228.46232720, gp, &c());
        assert!(close(acetic, -392.67, 0.01), "{acetic}");
        let clf = deprotonation_delta_g(-787.66794756, -787.21699482, gp, &c());
        assert!(close(clf, -405.68, 0.01), "{clf}");
        assert_eq!(deprotonation_delta_g(-5.0, -5.0, 0.0, &c()), 0.0);
    }

    #[test]
    fn default_proton_reproduces_level_one_delta_g() {
        let dg =
            deprotonation_delta_g(-228.93401544, -228.46232720, DEFAULT_AQUEOUS_PROTON_G, &c());
        assert!(close(dg, 30.09, 1e-6), "{dg}");
        assert!(close(c().to_kcal(DEFAULT_AQUEOUS_PROTON_G), -265.90, 0.01));
    }

    #[test]
    fn calibration_against_references() {
        let cal = calibrate_proton_correction(&[(-392.67, 4.76)], &c()).unwrap();
        assert!(close(cal.corrections[0], 399.17, 0.01));
        let den = c().pka_denominator();
        let zero = calibrate_proton_correction(&[(3.0 * den, 3.0)], &c()).unwrap();
        assert!(close(zero.mean, 0.0, 1e-12));
        assert_eq!(
            calibrate_proton_correction(&[], &c()),
            Err(ThermoError::EmptyReferences)
        );
        let mean = calibrate_proton_correction(
            &[(-392.67, 4.76), (-398.93, 2.586), (-401.67, 2.86)],
            &c(),
        )
        .unwrap()
        .mean;
        assert!(close(mean, 402.40, 0.01), "{mean}");
    }

    #[test]
    fn prediction() {
        let p = predict_pka(-405.68, &[399.17], &c()).unwrap();
        assert!(close(p.per_reference[0], -4.77, 0.01));
        let p = predict_pka(-405.68, &[399.17, 402.47, 405.58], &c()).unwrap();
        assert!(close(p.mean, -2.40, 0.01), "{}", p.mean);
        let p = predict_pka(-12.5, &[12.5], &c()).unwrap();
        assert_eq!(p.per_reference[0], 0.0);
        assert_eq!(predict_pka(1.0, &[], &c()), Err(ThermoError::EmptyCorrections));
    }

    fn ring_series(shift: f64) -> BTreeMap<u32, RingPair> {
        let data: [(u32, &str, &str, &str, &str); 5] = [
            (4, "-156.97750623", "-157.00875133", "-156.97713515", "-157.00924504"),
            (5, "-196.26052391", "-196.29560537", "-196.23529021", "-196.26988373"),
            (6, "-235.51319492", "-235.54940024", "-235.51670624", "-235.55442023"),
            (7, "-274.76661840", "-274.80524601", "-274.77956823", "-274.81821701"),
            (8, "-314.01064700", "-314.05190429", "-314.01498741", "-314.05692134"),
        ];
        let s = |v: &str| format!("{}", v.parse::<f64>().unwrap() + shift);
        data.iter()
            .map(|(n, ch, cg, mh, mg)| {
                (
                    *n,
                    RingPair {
                        cyclo: ThermoRecord::new(format!("cyclo{n}"))
                            .with(Property::H, &s(ch))
                            .with(Property::G, &s(cg)),
                        methyl_smaller: ThermoRecord::new(format!("methylcyclo{}", n - 1))
                            .with(Property::H, &s(mh))
                            .with(Property::G, &s(mg)),
                    },
                )
            })
            .collect()
    }

    #[test]
    fn ring_strain_enthalpy_table() {
        let out = ring_strain(&ring_series(0.0), 6, Property::H, &c()).unwrap();
        let expected = [(3, 13.86), (4, 13.63), (5, -2.20), (6, 0.0), (7, 8.13), (8, 10.85)];
        for (n, v) in expected {
            assert!(close(out.strain[&n], v, 0.01), "n={n}: {}", out.strain[&n]);
        }
        assert_eq!(out.strain[&6], 0.0);
    }

    #[test]
    fn ring_strain_errors() {
        let mut s = ring_series(0.0);
        s.remove(&6);
        assert_eq!(
            ring_strain(&s, 5, Property::H, &c()),
            Err(ThermoError::SeriesGap(6))
        );
        assert!(matches!(
            ring_strain(&ring_series(0.0), 9, Property::H, &c()),
            Err(ThermoError::ReferenceOutOfRange { .. })
        ));
        assert_eq!(
            ring_strain(&BTreeMap::new(), 6, Property::H, &c()),
            Err(ThermoError::EmptySeries)
        );
    }

    #[test]
    fn ring_strain_shift_invariance() {
        let base = ring_strain(&ring_series(0.0), 6, Property::G, &c()).unwrap();
        let shifted = ring_strain(&ring_series(0.125), 6, Property::G, &c()).unwrap();
        for (n, v) in &base.strain {
            assert!(close(*v, shifted.strain[n], 1e-6));
        }
    }

    #[test]
    fn conformer_ranking() {
        let confs: Vec<(String, f64)> = [
            ("cn9_YICLED", -1544.53545294825108),
            ("tri_tri_mer_capped", -1544.53675364646824),
            ("tricapped_trigonal_prismatic", -1544.53704995156204),
            ("capped_square_antiprismatic_0", -1544.53720655504048),
            ("capped_square_antiprismatic_1", -1544.53307801377878),
        ]
        .iter()
        .map(|(l, v)| (l.to_string(), *v))
        .collect();
        let rel = relative_energies(&confs, &c()).unwrap();
        assert_eq!(most_stable(&confs), Some("capped_square_antiprismatic_0"));
        assert!(close(rel[4].1, 2.59, 0.01));
        assert_eq!(rel[3].1, 0.0);

        let single = vec![("a".to_string(), -1.0)];
        assert_eq!(relative_energies(&single, &c()).unwrap()[0].1, 0.0);
        let pair = vec![("a".to_string(), -1.0), ("b".to_string(), -1.0)];
        assert!(relative_energies(&pair, &c()).unwrap().iter().all(|(_, v)| *v == 0.0));
        assert_eq!(relative_energies(&[], &c()), Err(ThermoError::EmptyConformers));
    }

    proptest! {
        #[test]
        fn reaction_delta_is_antisymmetric_and_additive(
            a in -500.0f64..0.0, b in -500.0f64..0.0, d in -500.0f64..0.0,
        ) {
            let t = EnergyTable::from_records(vec![
                ThermoRecord::new("a").with(Property::E, &a.to_string()),
                ThermoRecord::new("b").with(Property::E, &b.to_string()),
                ThermoRecord::new("d").with(Property::E, &d.to_string()),
            ]);
            let ab = Reaction::simple("a", "b");
            let bd = Reaction::simple("b", "d");
            let ad = Reaction::simple("a", "d");
            let f = |r: &Reaction| reaction_delta(&t, r, Property::E, &c()).unwrap();
            prop_assert!((f(&ab) + f(&ab.reversed())).abs() < 1e-9);
            prop_assert!((f(&ab) + f(&bd) - f(&ad)).abs() < 1e-7);
        }

        #[test]
        fn calibrate_then_predict_returns_experiment(
            dg in -450.0f64..-350.0, pka in -2.0f64..12.0,
        ) {
            let cal = calibrate_proton_correction(&[(dg, pka)], &c()).unwrap();
            let pred = predict_pka(dg, &cal.corrections, &c()).unwrap();
            prop_assert!((pred.mean - pka).abs() < 1e-9);
        }

        #[test]
        fn ranking_ignores_shift_and_scale(
            values in prop::collection::vec(-2000.0f64..-1000.0, 1..8),
            shift in -10.0f64..10.0,
            scale in 0.1f64..1000.0,
        ) {
            let confs: Vec<(String, f64)> =
                values.iter().enumerate().map(|(i, v)| (format!("c{i}"), *v)).collect();
            let shifted: Vec<(String, f64)> =
                confs.iter().map(|(l, v)| (l.clone(), v + shift)).collect();
            let scaled = Constants { hartree_to_kcal: scale, ..c() };
            let argmin = |rel: &[(String, f64)]| {
                rel.iter().position(|(_, v)| *v == 0.0).unwrap()
            };
            let base = relative_energies(&confs, &c()).unwrap();
            prop_assert_eq!(argmin(&base), argmin(&relative_energies(&shifted, &c()).unwrap()));
            prop_assert_eq!(argmin(&base), argmin(&relative_energies(&confs, &scaled).unwrap()));
        }
    }
}
