//! Energy tables: delimited text with a header naming `label` and any of
//! `E`, `H`, `G` (hartree). Comma or tab separated; `#` starts a comment line.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Property, RingPair, ThermoRecord};
use crate::energy::Decimal;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("energy table is empty")]
    Empty,
    #[error("header must contain a label column")]
    NoLabelColumn,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTable {
    records: Vec<ThermoRecord>,
}

enum Column {
    Label,
    Value(Property),
}

fn column(name: &str) -> Result<Column, TableError> {
    let n = name.trim();
    if n.eq_ignore_ascii_case("label") || n.eq_ignore_ascii_case("name") {
        return Ok(Column::Label);
    }
    n.parse::<Property>()
        .map(Column::Value)
        .map_err(|_| TableError::UnknownColumn(n.to_string()))
}

impl EnergyTable {
    pub fn from_records(records: Vec<ThermoRecord>) -> Self {
        Self { records }
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .ok_or(TableError::Empty)?;
        let delimiter = if first.contains('\t') { b'\t' } else { b',' };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());

        let columns = reader
            .headers()?
            .iter()
            .map(column)
            .collect::<Result<Vec<_>, _>>()?;
        if !columns.iter().any(|c| matches!(c, Column::Label)) {
            return Err(TableError::NoLabelColumn);
        }

        let mut records: Vec<ThermoRecord> = Vec::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.iter().all(str::is_empty) {
                continue;
            }
            let mut record = ThermoRecord::new("");
            for (col, cell) in columns.iter().zip(row.iter()) {
                match col {
                    Column::Label => record.label = cell.to_string(),
                    Column::Value(_) if cell.is_empty() => {}
                    Column::Value(p) => {
                        let d: Decimal = cell.parse().map_err(|e| TableError::Row {
                            line,
                            message: format!("{e}"),
                        })?;
                        match p {
                            Property::E => record.electronic_energy = Some(d),
                            Property::H => record.enthalpy = Some(d),
                            Property::G => record.gibbs = Some(d),
                        }
                    }
                }
            }
            if record.label.is_empty() {
                return Err(TableError::Row {
                    line,
                    message: "missing label".into(),
                });
            }
            if record.electronic_energy.is_none()
                && record.enthalpy.is_none()
                && record.gibbs.is_none()
            {
                return Err(TableError::Row {
                    line,
                    message: format!("{:?} has no energy values", record.label),
                });
            }
            if records.iter().any(|r| r.label == record.label) {
                return Err(TableError::DuplicateLabel(record.label));
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(TableError::Empty);
        }
        Ok(Self { records })
    }

    pub fn get(&self, label: &str) -> Option<&ThermoRecord> {
        self.records.iter().find(|r| r.label == label)
    }

    pub fn records(&self) -> &[ThermoRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(label, value)` pairs for every record carrying `property`.
    pub fn column(&self, property: Property) -> Vec<(String, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.get(property).ok().map(|v| (r.label.clone(), v)))
            .collect()
    }

    /// Builds an isodesmic ring series from conventionally named records.
    /// Accepts `cyclopropane`..`cyclooctane` / `methylcyclopropane`.. names
    /// as well as `cyclo<n>` / `methylcyclo<n>`.
    pub fn ring_series(&self) -> BTreeMap<u32, RingPair> {
        let find = |prefix: &str, n: u32| -> Option<ThermoRecord> {
            let short = format!("{prefix}{n}");
            let long = ring_name(n).map(|stem| format!("{prefix}{stem}"));
            self.records
                .iter()
                .find(|r| {
                    let l = r.label.to_ascii_lowercase();
                    l == short || l == format!("{prefix}_{n}") || Some(&l) == long.as_ref()
                })
                .cloned()
        };
        (2..=40)
            .filter_map(|n| {
                Some((
                    n,
                    RingPair {
                        cyclo: find("cyclo", n)?,
                        methyl_smaller: find("methylcyclo", n - 1)?,
                    },
                ))
            })
            .collect()
    }
}

fn ring_name(n: u32) -> Option<&'static str> {
    Some(match n {
        3 => "propane",
        4 => "butane",
        5 => "pentane",
        6 => "hexane",
        7 => "heptane",
        8 => "octane",
        9 => "nonane",
        10 => "decane",
        _ => return None,
    })
}
