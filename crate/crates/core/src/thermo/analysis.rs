//! Named post-analysis jobs over an [`EnergyTable`], shared by the command
//! line and the agent tools.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::report::two;
use super::{
    calibrate_proton_correction, calibration_report, conformer_report, deprotonation_delta_g,
    most_stable, pka_from_delta_g, predict_pka, reaction_delta, reaction_report,
    relative_energies, ring_strain, ring_strain_report, CalibrationRow, Constants, EnergyTable,
    Property, Reaction, ReportTable, ThermoError, DEFAULT_AQUEOUS_PROTON_G,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("{0}")]
    Thermo(#[from] ThermoError),
    #[error("an energy table is required for this analysis")]
    NoTable,
    #[error("{0}")]
    Input(String),
}

/// Acid/conjugate-base labels with an optional experimental pKa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcidPair {
    pub acid: String,
    pub anion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pka: Option<f64>,
}

impl std::str::FromStr for AcidPair {
    type Err = String;

    /// `acid:anion` or `acid:anion:pka`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let pka = match parts.get(2) {
            Some(p) => Some(p.parse::<f64>().map_err(|e| format!("bad pKa in {s:?}: {e}"))?),
            None => None,
        };
        match parts.as_slice() {
            [a, b] | [a, b, _] if !a.is_empty() && !b.is_empty() => Ok(AcidPair {
                acid: a.to_string(),
                anion: b.to_string(),
                pka,
            }),
            _ => Err(format!("expected acid:anion[:pka], got {s:?}")),
        }
    }
}

impl std::str::FromStr for Reaction {
    type Err = String;

    /// `A + 2 B -> C`; coefficients default to 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once("->")
            .ok_or_else(|| format!("reaction {s:?} has no '->'"))?;
        let side = |text: &str| -> Result<Vec<(String, u32)>, String> {
            text.split('+')
                .map(|term| {
                    let words: Vec<&str> = term.split_whitespace().collect();
                    match words.as_slice() {
                        [label] => Ok((label.to_string(), 1)),
                        [coef, label] => coef
                            .parse::<u32>()
                            .ok()
                            .filter(|c| *c > 0)
                            .map(|c| (label.to_string(), c))
                            .ok_or_else(|| format!("bad coefficient {coef:?}")),
                        _ => Err(format!("bad term {term:?} in {s:?}")),
                    }
                })
                .collect()
        };
        Ok(Reaction {
            reactants: side(lhs)?,
            products: side(rhs)?,
        })
    }
}

impl Reaction {
    pub fn describe(&self) -> String {
        let side = |terms: &[(String, u32)]| {
            terms
                .iter()
                .map(|(l, c)| if *c == 1 { l.clone() } else { format!("{c} {l}") })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        format!("{} -> {}", side(&self.reactants), side(&self.products))
    }
}

fn default_reference() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    /// Either a ready ΔG (kcal/mol) or an acid/anion pair looked up in the
    /// table together with a proton free energy.
    Pka {
        #[serde(default)]
        delta_g: Option<f64>,
        #[serde(default)]
        pair: Option<AcidPair>,
        #[serde(default)]
        proton_g: Option<f64>,
    },
    CalibratePka {
        references: Vec<AcidPair>,
        #[serde(default)]
        target: Option<AcidPair>,
        /// Label of the proton record; `proton_g` wins when both are given.
        #[serde(default)]
        proton: Option<String>,
        #[serde(default)]
        proton_g: Option<f64>,
    },
    RingStrain {
        #[serde(default = "default_reference")]
        reference: u32,
    },
    Reaction {
        reactions: Vec<String>,
    },
    Relative {
        #[serde(default)]
        property: Option<Property>,
        #[serde(default)]
        title: Option<String>,
    },
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Pka { .. } => "pka",
            Analysis::CalibratePka { .. } => "calibrate-pka",
            Analysis::RingStrain { .. } => "ring-strain",
            Analysis::Reaction { .. } => "reaction",
            Analysis::Relative { .. } => "relative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOutput {
    pub tables: Vec<ReportTable>,
    /// Unrounded numbers behind the tables.
    pub values: Value,
}

impl AnalysisOutput {
    pub fn render(&self) -> String {
        self.tables
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn need(table: Option<&EnergyTable>) -> Result<&EnergyTable, AnalysisError> {
    match table {
        Some(t) if !t.is_empty() => Ok(t),
        _ => Err(AnalysisError::NoTable),
    }
}

fn gibbs(table: &EnergyTable, label: &str) -> Result<f64, AnalysisError> {
    let record = table
        .get(label)
        .ok_or_else(|| ThermoError::MissingLabel(label.to_string()))?;
    Ok(record.get(Property::G)?)
}

fn pair_delta_g(
    table: &EnergyTable,
    pair: &AcidPair,
    proton_g: f64,
    constants: &Constants,
) -> Result<f64, AnalysisError> {
    Ok(deprotonation_delta_g(
        gibbs(table, &pair.acid)?,
        gibbs(table, &pair.anion)?,
        proton_g,
        constants,
    ))
}

pub fn run(
    analysis: &Analysis,
    table: Option<&EnergyTable>,
    constants: &Constants,
) -> Result<AnalysisOutput, AnalysisError> {
    match analysis {
        Analysis::Pka {
            delta_g,
            pair,
            proton_g,
        } => {
            let (dg, label) = match (delta_g, pair) {
                (Some(dg), _) => (*dg, "input".to_string()),
                (None, Some(pair)) => {
                    let g = proton_g.unwrap_or(DEFAULT_AQUEOUS_PROTON_G);
                    (pair_delta_g(need(table)?, pair, g, constants)?, pair.acid.clone())
                }
                (None, None) => {
                    return Err(AnalysisError::Input(
                        "pka needs either a delta_g or an acid:anion pair".into(),
                    ))
                }
            };
            let pka = pka_from_delta_g(dg, constants);
            let mut t = ReportTable::new("pKa from Deprotonation Free Energy", &["Acid", "ΔG (kcal/mol)", "pKa"]);
            t.row(vec![label, two(dg), two(pka)]);
            Ok(AnalysisOutput {
                tables: vec![t],
                values: json!({"delta_g": dg, "pka": pka}),
            })
        }
        Analysis::CalibratePka {
            references,
            target,
            proton,
            proton_g,
        } => {
            let table = need(table)?;
            if references.is_empty() {
                return Err(ThermoError::EmptyReferences.into());
            }
            let gp = match (proton_g, proton) {
                (Some(g), _) => *g,
                (None, Some(label)) => gibbs(table, label)?,
                (None, None) => gibbs(table, "proton")?,
            };
            let mut raw = Vec::new();
            for r in references {
                let pka = r.pka.ok_or_else(|| {
                    AnalysisError::Input(format!("reference {} has no experimental pKa", r.acid))
                })?;
                raw.push((pair_delta_g(table, r, gp, constants)?, pka));
            }
            let calibration = calibrate_proton_correction(&raw, constants)?;
            let den = constants.pka_denominator();
            let rows: Vec<CalibrationRow<'_>> = references
                .iter()
                .zip(&raw)
                .map(|(r, (dg, pka))| CalibrationRow {
                    acid: &r.acid,
                    delta_g_raw: *dg,
                    delta_g_exp: pka * den,
                })
                .collect();
            let mut values = json!({
                "delta_g_raw": raw.iter().map(|(dg, _)| *dg).collect::<Vec<_>>(),
                "corrections": calibration.corrections,
                "mean_correction": calibration.mean,
            });
            let tables = match target {
                Some(t) => {
                    let dg = pair_delta_g(table, t, gp, constants)?;
                    let prediction = predict_pka(dg, &calibration.corrections, constants)?;
                    values["target_delta_g_raw"] = json!(dg);
                    values["predictions"] = json!(prediction.per_reference);
                    values["mean_prediction"] = json!(prediction.mean);
                    calibration_report(&rows, &calibration, Some((&t.acid, dg, &prediction)))
                }
                None => calibration_report(&rows, &calibration, None),
            };
            Ok(AnalysisOutput { tables, values })
        }
        Analysis::RingStrain { reference } => {
            let table = need(table)?;
            let series = table.ring_series();
            let h = ring_strain(&series, *reference, Property::H, constants)?;
            let g = ring_strain(&series, *reference, Property::G, constants).ok();
            let mut values = json!({
                "reference": reference,
                "strain_h": h.strain,
                "delta_h": h.reaction_deltas,
            });
            if let Some(g) = &g {
                values["strain_g"] = json!(g.strain);
                values["delta_g"] = json!(g.reaction_deltas);
            }
            let mut steps = ReportTable::new(
                "Isodesmic Reaction Energies (kcal/mol)",
                &["n", "Reaction", "ΔH", "ΔG"],
            );
            for (n, dh) in &h.reaction_deltas {
                let dg = g
                    .as_ref()
                    .and_then(|g| g.reaction_deltas.get(n))
                    .map(|x| two(*x))
                    .unwrap_or_else(|| "-".into());
                steps.row(vec![
                    n.to_string(),
                    format!("C{n} ring -> methyl C{} ring", n - 1),
                    two(*dh),
                    dg,
                ]);
            }
            Ok(AnalysisOutput {
                tables: vec![steps, ring_strain_report(&h, g.as_ref(), *reference)],
                values,
            })
        }
        Analysis::Reaction { reactions } => {
            let table = need(table)?;
            if reactions.is_empty() {
                return Err(AnalysisError::Input("no reactions given".into()));
            }
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for text in reactions {
                let r: Reaction = text.parse().map_err(AnalysisError::Input)?;
                let dh = reaction_delta(table, &r, Property::H, constants);
                let dg = reaction_delta(table, &r, Property::G, constants);
                let (dh, dg) = match (dh, dg) {
                    (Err(e), Err(_)) => return Err(e.into()),
                    (h, g) => (h.ok(), g.ok()),
                };
                values.push(json!({"reaction": r.describe(), "delta_h": dh, "delta_g": dg}));
                rows.push((r.describe(), dh, dg));
            }
            Ok(AnalysisOutput {
                tables: vec![reaction_report(&rows)],
                values: Value::Array(values),
            })
        }
        Analysis::Relative { property, title } => {
            let table = need(table)?;
            let property = match property {
                Some(p) => *p,
                None => [Property::E, Property::G, Property::H]
                    .into_iter()
                    .find(|p| table.records().iter().all(|r| r.get(*p).is_ok()))
                    .ok_or_else(|| {
                        AnalysisError::Input("no property is present on every record".into())
                    })?,
            };
            let column = table.column(property);
            if column.len() != table.len() {
                let missing = table
                    .records()
                    .iter()
                    .find(|r| r.get(property).is_err())
                    .map(|r| r.label.clone())
                    .unwrap_or_default();
                return Err(ThermoError::MissingProperty {
                    label: missing,
                    property,
                }
                .into());
            }
            let rel = relative_energies(&column, constants)?;
            let title = title
                .clone()
                .unwrap_or_else(|| "Relative Energies (in kcal/mol)".to_string());
            Ok(AnalysisOutput {
                tables: vec![conformer_report(&title, &rel)],
                values: json!({
                    "property": property.to_string(),
                    "most_stable": most_stable(&column),
                    "relative": rel.iter().map(|(l, v)| json!({"label": l, "kcal": v})).collect::<Vec<_>>(),
                }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(name: &str) -> EnergyTable {
        let path = format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"));
        EnergyTable::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn close(a: &Value, b: f64, tol: f64) -> bool {
        (a.as_f64().unwrap() - b).abs() <= tol
    }

    #[test]
    fn pka_from_delta_g_and_from_pair() {
        let c = Constants::default();
        let out = run(
            &Analysis::Pka { delta_g: Some(30.09), pair: None, proton_g: None },
            None,
            &c,
        )
        .unwrap();
        assert!(close(&out.values["pka"], 22.05, 0.01));
        assert!(out.render().contains("22.05"));

        let pair: AcidPair = "acetic_acid:acetate_ion".parse().unwrap();
        let out = run(
            &Analysis::Pka { delta_g: None, pair: Some(pair), proton_g: None },
            Some(&data("carboxylic_acids.csv")),
            &c,
        )
        .unwrap();
        assert!(close(&out.values["delta_g"], 30.09, 0.01));

        let err = run(&Analysis::Pka { delta_g: None, pair: None, proton_g: None }, None, &c);
        assert!(matches!(err, Err(AnalysisError::Input(_))));
    }

    #[test]
    fn calibration_table() {
        let refs = ["acetic_acid:acetate_ion:4.76", "fluoroacetic_acid:fluoroacetate_ion:2.586", "chloroacetic_acid:chloroacetate_ion:2.86"];
        let a = Analysis::CalibratePka {
            references: refs.iter().map(|r| r.parse().unwrap()).collect(),
            target: Some("chlorofluoroacetic_acid:chlorofluoroacetate_ion".parse().unwrap()),
            proton: None,
            proton_g: None,
        };
        let out = run(&a, Some(&data("carboxylic_acids.csv")), &Constants::default()).unwrap();
        for (i, v) in [399.17, 402.47, 405.58].iter().enumerate() {
            assert!(close(&out.values["corrections"][i], *v, 0.01));
        }
        assert!(close(&out.values["mean_prediction"], -2.40, 0.01));
        assert_eq!(out.tables.len(), 2);
        assert!(out.tables[1].to_string().contains("Average prediction\t-2.40"));
    }

    #[test]
    fn ring_strain_tables() {
        let out = run(
            &Analysis::RingStrain { reference: 6 },
            Some(&data("ring_strain.csv")),
            &Constants::default(),
        )
        .unwrap();
        assert!(close(&out.values["strain_h"]["3"], 13.86, 0.01));
        assert!(out.tables[1].to_string().contains("\n6\t0.00\t0.00\n"));
    }

    #[test]
    fn reactions_and_relative() {
        let c = Constants::default();
        let t = data("ring_strain.csv");
        let out = run(
            &Analysis::Reaction { reactions: vec!["cyclobutane -> methylcyclopropane".into()] },
            Some(&t),
            &c,
        )
        .unwrap();
        assert!(close(&out.values[0]["delta_h"], 0.23, 0.01));

        let out = run(
            &Analysis::Relative { property: None, title: None },
            Some(&data("ce_conformers_sp.csv")),
            &c,
        )
        .unwrap();
        assert_eq!(out.values["most_stable"], "capped_square_antiprismatic_0");
        assert!(out.render().contains("capped_square_antiprismatic_1\t2.59"));

        assert_eq!(
            run(&Analysis::RingStrain { reference: 6 }, None, &c),
            Err(AnalysisError::NoTable)
        );
    }

    #[test]
    fn reaction_syntax() {
        let r: Reaction = "2 a + b -> c".parse().unwrap();
        assert_eq!(r.reactants, vec![("a".into(), 2), ("b".into(), 1)]);
        assert_eq!(r.describe(), "2 a + b -> c");
        assert!("a + b".parse::<Reaction>().is_err());
        assert!("0 a -> b".parse::<Reaction>().is_err());
        let kind: Analysis = serde_json::from_value(json!({"kind": "ring-strain"})).unwrap();
        assert_eq!(kind, Analysis::RingStrain { reference: 6 });
    }
}
