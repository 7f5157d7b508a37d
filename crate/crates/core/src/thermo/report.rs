//! Tab-separated report tables with two-decimal kcal/mol values.

use std::fmt;

use serde::Serialize;

use super::{Calibration, Prediction, RingStrain};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        writeln!(f)?;
        writeln!(f, "{}", self.headers.join("\t"))?;
        for row in &self.rows {
            writeln!(f, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

pub(crate) fn two(x: f64) -> String {
    // avoid "-0.00"
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn reaction_report(rows: &[(String, Option<f64>, Option<f64>)]) -> ReportTable {
    let mut t = ReportTable::new("Reaction Energies (kcal/mol)", &["Reaction", "ΔH", "ΔG"]);
    let cell = |v: &Option<f64>| v.map(two).unwrap_or_else(|| "-".into());
    for (name, dh, dg) in rows {
        t.row(vec![name.clone(), cell(dh), cell(dg)]);
    }
    t
}

/// Strain table; `g` is optional so enthalpy-only tables still render.
pub fn ring_strain_report(h: &RingStrain, g: Option<&RingStrain>, reference: u32) -> ReportTable {
    let title = format!("Ring Strain Energies (relative to n={reference})");
    let mut t = ReportTable::new(
        &title,
        &["Ring Size (n)", "Strain ΔH (kcal/mol)", "Strain ΔG (kcal/mol)"],
    );
    for (n, v) in &h.strain {
        let gv = g
            .and_then(|g| g.strain.get(n))
            .map(|x| two(*x))
            .unwrap_or_else(|| "-".into());
        t.row(vec![n.to_string(), two(*v), gv]);
    }
    t
}

pub struct CalibrationRow<'a> {
    pub acid: &'a str,
    pub delta_g_raw: f64,
    pub delta_g_exp: f64,
}

pub fn calibration_report(
    refs: &[CalibrationRow<'_>],
    calibration: &Calibration,
    target: Option<(&str, f64, &Prediction)>,
) -> Vec<ReportTable> {
    let mut dg = ReportTable::new(
        "Calculated ΔG of Deprotonation",
        &[
            "Acid",
            "ΔG (uncorrected, kcal/mol)",
            "ΔG (experimental, kcal/mol)",
            "Correction (kcal/mol)",
        ],
    );
    for (r, c) in refs.iter().zip(&calibration.corrections) {
        dg.row(vec![r.acid.into(), two(r.delta_g_raw), two(r.delta_g_exp), two(*c)]);
    }
    if let Some((name, raw, _)) = target {
        dg.row(vec![name.into(), two(raw), "-".into(), "-".into()]);
    }
    dg.row(vec![
        "Average correction".into(),
        "-".into(),
        "-".into(),
        two(calibration.mean),
    ]);
    let mut out = vec![dg];
    if let Some((name, _, prediction)) = target {
        let mut p = ReportTable::new(
            &format!("Predicted pKa of {name}"),
            &["Reference Acid", "Predicted pKa"],
        );
        for (r, v) in refs.iter().zip(&prediction.per_reference) {
            p.row(vec![format!("Using {}", r.acid), two(*v)]);
        }
        p.row(vec!["Average prediction".into(), two(prediction.mean)]);
        out.push(p);
    }
    out
}

/// Relative energies sorted ascending; the minimum is annotated.
pub fn conformer_report(title: &str, relative: &[(String, f64)]) -> ReportTable {
    let mut t = ReportTable::new(title, &["Conformer", "Relative (kcal/mol)"]);
    let mut sorted = relative.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (i, (label, v)) in sorted.iter().enumerate() {
        let cell = if i == 0 {
            format!("{} (most stable)", two(*v))
        } else {
            two(*v)
        };
        t.row(vec![label.clone(), cell]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformer_table_layout() {
        let rel = vec![("b".to_string(), 2.591), ("a".to_string(), 0.0)];
        let text = conformer_report("Relative Energies (in kcal/mol)", &rel).to_string();
        assert_eq!(
            text,
            "Relative Energies (in kcal/mol)\n\nConformer\tRelative (kcal/mol)\na\t0.00 (most stable)\nb\t2.59\n"
        );
    }

    #[test]
    fn negative_zero_is_printed_plain() {
        assert_eq!(two(-0.001), "0.00");
        assert_eq!(two(-2.2034), "-2.20");
    }
}
