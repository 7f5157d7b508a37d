//! Molecular geometries, XYZ text I/O and normal-mode displacement.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default largest per-atom shift applied when displacing along a mode, in Å.
pub const DEFAULT_DISPLACEMENT_AMPLITUDE: f64 = 0.3;

const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("xyz: missing atom count line")]
    MissingCount,
    #[error("xyz: invalid atom count {0:?}")]
    BadCount(String),
    #[error("xyz: header declares {declared} atoms but {found} atom lines follow")]
    CountMismatch { declared: usize, found: usize },
    #[error("xyz line {line}: unknown element {token:?}")]
    BadElement { line: usize, token: String },
    #[error("xyz line {line}: non-numeric coordinate {token:?}")]
    BadCoordinate { line: usize, token: String },
    #[error("xyz line {line}: expected `El x y z`")]
    ShortLine { line: usize },
    #[error("mode has {mode} displacement vectors but the molecule has {atoms} atoms")]
    ModeSizeMismatch { mode: usize, atoms: usize },
    #[error("mode displacement vector is zero")]
    ZeroMode,
    #[error("displacement amplitude must be positive and finite, got {0}")]
    BadAmplitude(f64),
    #[error("multiplicity must be at least 1")]
    BadMultiplicity,
}

/// Returns the canonical spelling of an element symbol, if it is one.
pub fn canonical_element(token: &str) -> Option<&'static str> {
    ELEMENTS
        .iter()
        .copied()
        .find(|el| el.eq_ignore_ascii_case(token))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    /// Cartesian position in Å.
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub charge: i32,
    pub multiplicity: u32,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>, charge: i32, multiplicity: u32) -> Result<Self, GeometryError> {
        if multiplicity < 1 {
            return Err(GeometryError::BadMultiplicity);
        }
        Ok(Self {
            atoms,
            charge,
            multiplicity,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.atoms.len().max(1) as f64;
        let mut c = [0.0; 3];
        for atom in &self.atoms {
            for k in 0..3 {
                c[k] += atom.position[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Hill-ordered formula (C, H, then alphabetical).
    pub fn formula(&self) -> String {
        let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
        for atom in &self.atoms {
            *counts.entry(atom.element.as_str()).or_default() += 1;
        }
        let mut out = String::new();
        let mut push = |el: &str, n: usize| {
            out.push_str(el);
            if n > 1 {
                let _ = write!(out, "{n}");
            }
        };
        let has_carbon = counts.contains_key("C");
        if has_carbon {
            if let Some(n) = counts.remove("C") {
                push("C", n);
            }
            if let Some(n) = counts.remove("H") {
                push("H", n);
            }
        }
        for (el, n) in counts {
            push(el, n);
        }
        out
    }
}

/// A vibrational normal mode. Negative frequencies encode imaginary modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    pub index: usize,
    /// cm⁻¹
    pub frequency: f64,
    pub displacement: Vec<[f64; 3]>,
}

/// Parses standard XYZ text. Charge 0 and multiplicity 1 are assumed; the
/// file format does not carry them.
pub fn parse_xyz(text: &str) -> Result<Molecule, GeometryError> {
    let mut lines = text.lines();
    let count_line = lines.next().ok_or(GeometryError::MissingCount)?;
    let declared: usize = count_line
        .trim()
        .parse()
        .map_err(|_| GeometryError::BadCount(count_line.trim().to_string()))?;
    // comment line, may be absent only when there are no atoms
    let _ = lines.next();

    let mut atoms = Vec::with_capacity(declared);
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 3;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let el_token = fields.next().ok_or(GeometryError::ShortLine { line: line_no })?;
        let element = canonical_element(el_token).ok_or_else(|| GeometryError::BadElement {
            line: line_no,
            token: el_token.to_string(),
        })?;
        let mut position = [0.0; 3];
        for slot in position.iter_mut() {
            let tok = fields.next().ok_or(GeometryError::ShortLine { line: line_no })?;
            let value: f64 = tok.parse().map_err(|_| GeometryError::BadCoordinate {
                line: line_no,
                token: tok.to_string(),
            })?;
            if !value.is_finite() {
                return Err(GeometryError::BadCoordinate {
                    line: line_no,
                    token: tok.to_string(),
                });
            }
            *slot = value;
        }
        atoms.push(Atom {
            element: element.to_string(),
            position,
        });
    }
    if atoms.len() != declared {
        return Err(GeometryError::CountMismatch {
            declared,
            found: atoms.len(),
        });
    }
    Molecule::new(atoms, 0, 1)
}

/// Writes XYZ text with ten decimal places per coordinate.
pub fn write_xyz(mol: &Molecule, comment: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", mol.atoms.len());
    let _ = writeln!(out, "{}", comment.replace('\n', " "));
    for atom in &mol.atoms {
        let [x, y, z] = atom.position;
        let _ = writeln!(out, "{:<2} {:>16.10} {:>16.10} {:>16.10}", atom.element, x, y, z);
    }
    out
}

/// Moves every atom along `mode` so that the most displaced atom shifts by
/// exactly `amplitude` Å.
pub fn displace_along_mode(
    mol: &Molecule,
    mode: &NormalMode,
    amplitude: f64,
) -> Result<Molecule, GeometryError> {
    if mode.displacement.len() != mol.atoms.len() {
        return Err(GeometryError::ModeSizeMismatch {
            mode: mode.displacement.len(),
            atoms: mol.atoms.len(),
        });
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(GeometryError::BadAmplitude(amplitude));
    }
    let max_norm = mode
        .displacement
        .iter()
        .map(|d| (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
        .fold(0.0_f64, f64::max);
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(GeometryError::ZeroMode);
    }
    let scale = amplitude / max_norm;
    let atoms = mol
        .atoms
        .iter()
        .zip(&mode.displacement)
        .map(|(atom, d)| Atom {
            element: atom.element.clone(),
            position: [
                atom.position[0] + scale * d[0],
                atom.position[1] + scale * d[1],
                atom.position[2] + scale * d[2],
            ],
        })
        .collect();
    Ok(Molecule {
        atoms,
        charge: mol.charge,
        multiplicity: mol.multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h_atom() -> Molecule {
        Molecule::new(
            vec![Atom {
                element: "H".into(),
                position: [0.0; 3],
            }],
            0,
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_hydrogen_round_trips() {
        let text = write_xyz(&h_atom(), "hydrogen");
        let back = parse_xyz(&text).unwrap();
        assert_eq!(back, h_atom());
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let text = "3\ncomment\nH 0 0 0\nH 0 0 0.74\n";
        assert_eq!(
            parse_xyz(text),
            Err(GeometryError::CountMismatch {
                declared: 3,
                found: 2
            })
        );
    }

    #[test]
    fn bad_tokens_are_rejected() {
        assert!(matches!(
            parse_xyz("1\n\nXx 0 0 0\n"),
            Err(GeometryError::BadElement { line: 3, .. })
        ));
        assert!(matches!(
            parse_xyz("1\n\nC 0 zero 0\n"),
            Err(GeometryError::BadCoordinate { line: 3, .. })
        ));
        assert!(matches!(
            parse_xyz("1\n\nC 0 NaN 0\n"),
            Err(GeometryError::BadCoordinate { .. })
        ));
        assert!(matches!(parse_xyz(""), Err(GeometryError::MissingCount)));
    }

    #[test]
    fn element_case_is_canonicalized() {
        let mol = parse_xyz("2\n\nce 0 0 0\nCL 1 0 0\n").unwrap();
        assert_eq!(mol.atoms[0].element, "Ce");
        assert_eq!(mol.atoms[1].element, "Cl");
    }

    #[test]
    fn writes_at_least_six_decimals() {
        let text = write_xyz(&h_atom(), "x");
        let coord = text.lines().nth(2).unwrap().split_whitespace().nth(1).unwrap();
        assert!(coord.split('.').nth(1).unwrap().len() >= 6);
    }

    #[test]
    fn formula_uses_hill_order() {
        let mol = parse_xyz("4\n\nO 0 0 0\nH 0 0 1\nC 1 0 0\nH 0 1 0\n").unwrap();
        assert_eq!(mol.formula(), "CH2O");
    }

    #[test]
    fn unit_displacement_on_one_atom() {
        let mol = parse_xyz("2\n\nC 0 0 0\nO 1.2 0 0\n").unwrap();
        let mode = NormalMode {
            index: 6,
            frequency: -100.0,
            displacement: vec![[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        };
        let out = displace_along_mode(&mol, &mode, 0.3).unwrap();
        assert!((out.atoms[0].position[2] - 0.3).abs() < 1e-12);
        assert_eq!(out.atoms[1].position, [1.2, 0.0, 0.0]);
        assert_eq!(out.charge, mol.charge);
        assert_eq!(out.multiplicity, mol.multiplicity);
    }

    #[test]
    fn zero_mode_is_rejected() {
        let mode = NormalMode {
            index: 6,
            frequency: -50.0,
            displacement: vec![[0.0; 3]],
        };
        assert_eq!(
            displace_along_mode(&h_atom(), &mode, 0.3),
            Err(GeometryError::ZeroMode)
        );
        let mode = NormalMode {
            displacement: vec![[1.0, 0.0, 0.0]],
            ..mode
        };
        assert_eq!(
            displace_along_mode(&h_atom(), &mode, 0.0),
            Err(GeometryError::BadAmplitude(0.0))
        );
    }

    #[test]
    fn symmetric_stretch_preserves_centroid() {
        let mol = parse_xyz("2\n\nH 0 0 -0.37\nH 0 0 0.37\n").unwrap();
        let mode = NormalMode {
            index: 0,
            frequency: -20.0,
            displacement: vec![[0.0, 0.0, -0.7], [0.0, 0.0, 0.7]],
        };
        let out = displace_along_mode(&mol, &mode, 0.3).unwrap();
        let (c0, c1) = (mol.centroid(), out.centroid());
        for k in 0..3 {
            assert!((c0[k] - c1[k]).abs() < 1e-12);
        }
        assert!((out.atoms[1].position[2] - 0.67).abs() < 1e-12);
    }

    fn arb_molecule() -> impl Strategy<Value = Molecule> {
        prop::collection::vec(
            (
                prop::sample::select(vec!["H", "C", "N", "O", "Cl", "Ce"]),
                prop::array::uniform3(-50.0f64..50.0),
            ),
            1..12,
        )
        .prop_map(|atoms| Molecule {
            atoms: atoms
                .into_iter()
                .map(|(el, position)| Atom {
                    element: el.to_string(),
                    position,
                })
                .collect(),
            charge: 0,
            multiplicity: 1,
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_within_tolerance(mol in arb_molecule()) {
            let back = parse_xyz(&write_xyz(&mol, "generated")).unwrap();
            prop_assert_eq!(back.atoms.len(), mol.atoms.len());
            for (a, b) in mol.atoms.iter().zip(&back.atoms) {
                prop_assert_eq!(&a.element, &b.element);
                for k in 0..3 {
                    prop_assert!((a.position[k] - b.position[k]).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn parse_then_write_is_stable(mol in arb_molecule()) {
            let canonical = write_xyz(&mol, "c");
            let again = write_xyz(&parse_xyz(&canonical).unwrap(), "c");
            prop_assert_eq!(canonical, again);
        }

        #[test]
        fn displacement_is_linear_in_amplitude(
            mol in arb_molecule(),
            seed in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 12),
            amp in 0.01f64..0.5,
        ) {
            let displacement: Vec<[f64; 3]> = seed.into_iter().take(mol.atoms.len()).collect();
            prop_assume!(displacement.iter().any(|d| d.iter().any(|v| v.abs() > 1e-3)));
            let mode = NormalMode { index: 6, frequency: -80.0, displacement };
            let twice = displace_along_mode(&mol, &mode, 2.0 * amp).unwrap();
            let stepped = displace_along_mode(
                &displace_along_mode(&mol, &mode, amp).unwrap(), &mode, amp).unwrap();
            for (a, b) in twice.atoms.iter().zip(&stepped.atoms) {
                for k in 0..3 {
                    prop_assert!((a.position[k] - b.position[k]).abs() < 1e-9);
                }
            }
        }
    }
}
