//! Builds solver-shaped output text for fixtures and tests.

use std::fmt::Write as _;

use super::catalog::KeywordCatalog;
use super::output::NORMAL_TERMINATION;
use super::validate::{validate_text, Location};
use crate::geometry::Molecule;

#[derive(Debug, Clone, Default)]
pub struct OutputBuilder {
    body: String,
}

fn rule(out: &mut String, title: &str) {
    let bar = "-".repeat(title.len());
    let _ = writeln!(out, "{bar}\n{title}\n{bar}");
}

impl OutputBuilder {
    pub fn new(job: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "                                 *****************");
        let _ = writeln!(body, "                                 * O   R   C   A *");
        let _ = writeln!(body, "                                 *****************\n");
        let _ = writeln!(body, "Input file: {job}.inp\n");
        Self { body }
    }

    pub fn coordinates(mut self, mol: &Molecule) -> Self {
        rule(&mut self.body, "CARTESIAN COORDINATES (ANGSTROEM)");
        for a in &mol.atoms {
            let [x, y, z] = a.position;
            let _ = writeln!(self.body, "  {:<2} {:>14.6} {:>14.6} {:>14.6}", a.element, x, y, z);
        }
        self.body.push('\n');
        self
    }

    pub fn scf(mut self, cycles: u32, energy: &str) -> Self {
        let _ = writeln!(self.body, "               *****************************************************");
        let _ = writeln!(self.body, "               *                     SUCCESS                       *");
        let _ = writeln!(self.body, "               *           SCF CONVERGED AFTER {cycles:>3} CYCLES          *");
        let _ = writeln!(self.body, "               *****************************************************\n");
        let _ = writeln!(self.body, "-------------------------   --------------------");
        let _ = writeln!(self.body, "FINAL SINGLE POINT ENERGY     {energy}");
        let _ = writeln!(self.body, "-------------------------   --------------------\n");
        self
    }

    pub fn opt_cycle(mut self, n: u32) -> Self {
        let _ = writeln!(self.body, "                         *****************************");
        let _ = writeln!(self.body, "                         *  GEOMETRY OPTIMIZATION CYCLE {n:>3}  *");
        let _ = writeln!(self.body, "                         *****************************\n");
        self
    }

    pub fn opt_converged(mut self) -> Self {
        let _ = writeln!(self.body, "                    ***********************HURRAY********************");
        let _ = writeln!(self.body, "                    ***        THE OPTIMIZATION HAS CONVERGED     ***");
        let _ = writeln!(self.body, "                    *************************************************\n");
        self
    }

    pub fn orbitals(mut self, occupied_ev: &[f64], virtual_ev: &[f64]) -> Self {
        rule(&mut self.body, "ORBITAL ENERGIES");
        let _ = writeln!(self.body, "\n  NO   OCC          E(Eh)            E(eV) ");
        let mut i = 0;
        for (occ, list) in [(2.0, occupied_ev), (0.0, virtual_ev)] {
            for ev in list {
                let _ = writeln!(
                    self.body,
                    "{i:>4}   {occ:.4} {:>16.6} {:>16.4} ",
                    ev / 27.211386,
                    ev
                );
                i += 1;
            }
        }
        self.body.push('\n');
        self
    }

    pub fn mulliken(self, charges: &[(&str, f64)]) -> Self {
        self.colon_charges("MULLIKEN ATOMIC CHARGES", charges)
    }

    pub fn loewdin(self, charges: &[(&str, f64)]) -> Self {
        self.colon_charges("LOEWDIN ATOMIC CHARGES", charges)
    }

    fn colon_charges(mut self, title: &str, charges: &[(&str, f64)]) -> Self {
        rule(&mut self.body, title);
        for (i, (el, q)) in charges.iter().enumerate() {
            let _ = writeln!(self.body, "{i:>4} {el:<2}:{q:>12.6}");
        }
        let total: f64 = charges.iter().map(|c| c.1).sum();
        let _ = writeln!(self.body, "Sum of atomic charges:{total:>12.7}\n");
        self
    }

    pub fn hirshfeld(mut self, charges: &[(&str, f64)]) -> Self {
        rule(&mut self.body, "HIRSHFELD ANALYSIS");
        let _ = writeln!(self.body, "\n  ATOM     CHARGE      SPIN    ");
        for (i, (el, q)) in charges.iter().enumerate() {
            let _ = writeln!(self.body, "{i:>4} {el:<2} {q:>11.6} {:>11.6}", 0.0);
        }
        let total: f64 = charges.iter().map(|c| c.1).sum();
        let _ = writeln!(self.body, "\n  TOTAL {total:>11.6} {:>11.6}\n", 0.0);
        self
    }

    pub fn dipole(mut self, components: [f64; 3], magnitude_debye: &str) -> Self {
        rule(&mut self.body, "DIPOLE MOMENT");
        let [x, y, z] = components;
        let _ = writeln!(self.body, "Total Dipole Moment    : {x:>14.5} {y:>14.5} {z:>14.5}");
        let _ = writeln!(self.body, "Magnitude (Debye)      : {magnitude_debye:>14}\n");
        self
    }

    /// Frequencies for all 3N coordinates; `modes[k]` is the 3N-vector of
    /// mode k. Modes are written six columns per block.
    pub fn frequencies(mut self, freqs: &[f64], modes: &[Vec<f64>]) -> Self {
        rule(&mut self.body, "VIBRATIONAL FREQUENCIES");
        let _ = writeln!(self.body, "\nScaling factor for frequencies =  1.000000000  (already applied!)\n");
        for (i, f) in freqs.iter().enumerate() {
            let flag = if *f < 0.0 { " ***imaginary mode***" } else { "" };
            let _ = writeln!(self.body, "{i:>5}:  {f:>12.2} cm**-1{flag}");
        }
        self.body.push('\n');
        rule(&mut self.body, "NORMAL MODES");
        let _ = writeln!(self.body, "\nThese modes are the Cartesian displacements weighted by the diagonal matrix");
        let _ = writeln!(self.body, "M(i,i)=1/sqrt(m[i]) where m[i] is the mass of the displaced atom");
        let _ = writeln!(self.body, "Thus, these vectors are normalized but *not* orthogonal\n");
        let n = freqs.len();
        for start in (0..n).step_by(6) {
            let cols: Vec<usize> = (start..(start + 6).min(n)).collect();
            let head: String = cols.iter().map(|c| format!("{c:>11}")).collect();
            let _ = writeln!(self.body, "      {head}");
            for row in 0..n {
                let vals: String = cols
                    .iter()
                    .map(|c| {
                        let v = modes.get(*c).and_then(|m| m.get(row)).copied().unwrap_or(0.0);
                        format!("{v:>11.6}")
                    })
                    .collect();
                let _ = writeln!(self.body, "{row:>6}{vals}");
            }
        }
        self.body.push('\n');
        self
    }

    pub fn thermochemistry(mut self, enthalpy: &str, gibbs: &str) -> Self {
        rule(&mut self.body, "ENTHALPY");
        let _ = writeln!(self.body, "Total Enthalpy                    ...   {enthalpy} Eh\n");
        rule(&mut self.body, "GIBBS FREE ENERGY");
        let _ = writeln!(self.body, "Final Gibbs free energy         ...   {gibbs} Eh\n");
        self
    }

    pub fn unknown_block_identifier(mut self, block: &str, line: usize, token: &str) -> Self {
        let _ = writeln!(self.body, "[file orca_tools/Tool-Scanner/qcscan1.cpp, line 106]:");
        let _ = writeln!(self.body, "  Unknown identifier in {block} block line {line}:\n");
        let _ = writeln!(self.body, "  Last token: {token}.\n");
        let _ = writeln!(self.body, "[file orca_main/maininp1.cpp, line 1047]: aborting the run\n");
        self
    }

    pub fn unrecognized_keyword(mut self, token: &str) -> Self {
        let _ = writeln!(self.body, "INPUT ERROR\n");
        let _ = writeln!(self.body, "UNRECOGNIZED OR DUPLICATED KEYWORD(S) IN SIMPLE INPUT LINE\n");
        let _ = writeln!(self.body, "       {token}\n");
        self
    }

    pub fn raw(mut self, text: &str) -> Self {
        self.body.push_str(text);
        if !text.ends_with('\n') {
            self.body.push('\n');
        }
        self
    }

    pub fn terminate(mut self) -> String {
        let _ = writeln!(self.body, "                             {NORMAL_TERMINATION}");
        let _ = writeln!(self.body, "TOTAL RUN TIME: 0 days 0 hours 1 minutes 2 seconds 0 msec");
        self.body
    }

    /// Output of a run that stopped without the normal-termination banner.
    pub fn abort(self) -> String {
        self.body
    }
}

/// The abort output the solver would print for `input`, or `None` if it
/// would accept it. The first offending line wins, as in the real program.
pub fn reject_input(job: &str, input: &str, catalog: &KeywordCatalog) -> Option<String> {
    let mut violations = match validate_text(input, catalog) {
        Ok(v) => v,
        Err(e) => return Some(OutputBuilder::new(job).raw(&format!("ERROR: {e}\naborting the run")).abort()),
    };
    violations.sort_by_key(|v| v.line.unwrap_or(usize::MAX));
    let v = violations.into_iter().next()?;
    let b = OutputBuilder::new(job);
    Some(match &v.location {
        Location::KeywordLine => b.unrecognized_keyword(&v.token).abort(),
        Location::Block(name) => b
            .unknown_block_identifier(&name.to_ascii_uppercase(), v.line.unwrap_or(0), &v.token)
            .abort(),
        Location::Unknown => b.raw(&format!("ERROR: {}\naborting the run", v.token)).abort(),
    })
}
