//! Solver input synthesis, allowed-list validation and output parsing.

mod catalog;
mod output;
mod property;
mod spec;
pub mod synth;
mod validate;

pub use catalog::{CatalogError, KeywordCatalog};
pub use output::{parse_output, Charges, Convergence, ErrorDiagnosis, ParsedOutput, NORMAL_TERMINATION};
pub use property::{extract_property, PropertyValue, UnknownProperty, PROPERTY_KEYS};
pub use spec::{
    render_input, BasisBlock, BlockEntry, CalcSpec, GeometryRef, RunType, SpecError, TddftBlock,
};
pub use validate::{
    parse_input, validate_document, validate_spec, validate_text, InputBlock, InputDocument,
    InputParseError, Location, Violation,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Atom, Molecule};
    use proptest::prelude::*;

    const GOLDEN_OPT: &str = include_str!("../../tests/golden/ce_opt_freq.inp");
    const GOLDEN_SP: &str = include_str!("../../tests/golden/ce_sp.inp");
    const BAD_TIGHTSCF: &str = include_str!("../../tests/golden/ce_opt_freq_tightscf.inp");
    const BAD_CONV: &str = include_str!("../../tests/golden/ce_opt_freq_convcriteria.inp");
    const BAD_VV10: &str = include_str!("../../tests/golden/ce_sp_vv10.inp");

    fn prints() -> Vec<String> {
        vec![
            "Print[ P_Basis ] 2".into(),
            "Print[ P_MOs ] 1".into(),
            "Print[P_hirshfeld] 1".into(),
        ]
    }

    fn scf() -> Vec<BlockEntry> {
        vec![BlockEntry::new("AutotraH", "false"), BlockEntry::new("MaxIter", 500)]
    }

    fn ce_opt() -> CalcSpec {
        CalcSpec {
            runtypes: RunType::parse_set("OPT_FREQ").unwrap(),
            functional: "PBE0".into(),
            basis: "def2-SVP".into(),
            dispersion: Some("D4".into()),
            approximations: vec!["RIJCOSX".into()],
            grid: Some("DEFGRID2".into()),
            scf_convergence: Some("TightSCF".into()),
            extra_keywords: vec![],
            maxcore: 4000,
            nprocs: 16,
            basis_block: Some(BasisBlock {
                basis: "def2-SVP".into(),
                ecp: Some("def2-ECP".into()),
            }),
            scf_block: scf(),
            geom_block: Some(vec![
                BlockEntry::new("MaxIter", 500),
                BlockEntry::new("coordsys", "redundant"),
                BlockEntry::new("cartfallback", "true"),
                BlockEntry::new("ReducePrint", "true"),
            ]),
            cpcm_block: None,
            tddft_block: None,
            output_prints: prints(),
            geometry: GeometryRef {
                charge: 0,
                multiplicity: 2,
                xyz_file: "cn9_YICLED_0_nunpairedes_0_charge_0_xtb.xyz".into(),
            },
        }
    }

    fn ce_sp() -> CalcSpec {
        CalcSpec {
            runtypes: vec![RunType::Sp],
            functional: "wB97M-V".into(),
            basis: "def2-SVPD".into(),
            dispersion: None,
            approximations: vec![],
            grid: None,
            scf_convergence: Some("TightSCF".into()),
            basis_block: Some(BasisBlock {
                basis: "def2-SVPD".into(),
                ecp: Some("def2-ECP".into()),
            }),
            geom_block: None,
            geometry: GeometryRef {
                charge: 0,
                multiplicity: 2,
                xyz_file: "cn9_YICLED_OPT_FREQ_removed2.xyz".into(),
            },
            ..ce_opt()
        }
    }

    #[test]
    fn golden_inputs_render_byte_exact() {
        assert_eq!(render_input(&ce_opt()).unwrap(), GOLDEN_OPT);
        assert_eq!(render_input(&ce_sp()).unwrap(), GOLDEN_SP);
        assert!(!GOLDEN_SP.contains("%geom"));
    }

    #[test]
    fn pre_fix_inputs_render_byte_exact() {
        let mut s = ce_opt();
        s.scf_block.push(BlockEntry::new("TightSCF", "true"));
        assert_eq!(render_input(&s).unwrap(), BAD_TIGHTSCF);
        let mut s = ce_sp();
        s.dispersion = Some("VV10".into());
        assert_eq!(render_input(&s).unwrap(), BAD_VV10);
    }

    #[test]
    fn minimal_spec_has_five_sections() {
        let text = render_input(&CalcSpec::minimal("h2.xyz")).unwrap();
        assert_eq!(
            text,
            "! SP HF def2-SVP\n%maxcore 4000\n%pal\n  nprocs 1\nend\n%scf\nend\n* xyzfile 0 1 h2.xyz\n"
        );
        let sections = text
            .lines()
            .filter(|l| l.starts_with('!') || l.starts_with('%') || l.starts_with('*'))
            .count();
        assert_eq!(sections, 5);
    }

    #[test]
    fn optional_blocks_render_in_order() {
        let mut s = CalcSpec::minimal("m.xyz");
        s.cpcm_block = Some("water".into());
        s.tddft_block = Some(TddftBlock { nroots: 10, triplets: true });
        s.output_prints = vec!["Print[ P_MOs ] 1".into()];
        let text = render_input(&s).unwrap();
        assert!(text.starts_with("! SP HF def2-SVP CPCM\n"));
        let pos = |m: &str| text.find(m).unwrap();
        assert!(pos("%scf") < pos("%cpcm") && pos("%cpcm") < pos("%tddft"));
        assert!(pos("%tddft") < pos("%output") && pos("%output") < pos("* xyzfile"));
        assert!(text.contains("%tddft\n  NRoots 10\n  Triplets true\nend\n"));
        assert!(text.contains("  SMDsolvent \"water\"\n"));
        assert!(validate_spec(&s, &KeywordCatalog::default()).unwrap().len() == 1);
    }

    #[test]
    fn structural_errors() {
        let mut s = CalcSpec::minimal("x.xyz");
        s.runtypes.push(RunType::Opt);
        assert_eq!(render_input(&s), Err(SpecError::SpWithOpt));
        let mut s = CalcSpec::minimal("x.xyz");
        s.runtypes.clear();
        assert_eq!(render_input(&s), Err(SpecError::NoRunType));
        let mut s = CalcSpec::minimal("x.xyz");
        s.nprocs = 0;
        assert!(render_input(&s).is_err());
        let mut s = CalcSpec::minimal("x.xyz");
        s.functional = "B3 LYP".into();
        assert!(matches!(render_input(&s), Err(SpecError::Whitespace { .. })));
    }

    #[test]
    fn validation_accepts_fixed_and_rejects_documented_tokens() {
        let c = KeywordCatalog::default();
        assert!(validate_text(GOLDEN_OPT, &c).unwrap().is_empty());
        assert!(validate_text(GOLDEN_SP, &c).unwrap().is_empty());
        assert!(validate_spec(&ce_opt(), &c).unwrap().is_empty());

        let v = validate_text(BAD_TIGHTSCF, &c).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "TIGHTSCF @ block(scf)");
        assert_eq!(v[0].line, Some(13));

        let v = validate_text(BAD_CONV, &c).unwrap();
        assert_eq!(v.iter().map(|v| v.to_string()).collect::<Vec<_>>(), ["CONVCRITERIA @ block(scf)"]);

        let v = validate_text(BAD_VV10, &c).unwrap();
        assert_eq!(v.iter().map(|v| v.to_string()).collect::<Vec<_>>(), ["VV10 @ keyword_line"]);
    }

    #[test]
    fn validation_flags_duplicates_unknown_blocks_and_core_range() {
        let c = KeywordCatalog::default();
        let v = validate_text("! SP HF HF def2-SVP\n%pal\n  nprocs 64\nend\n%foo\n  x 1\nend\n", &c).unwrap();
        let shown: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(shown, ["HF @ keyword_line", "FOO @ block(foo)", "NPROCS 64 @ block(pal)"]);
    }

    #[test]
    fn input_parse_errors() {
        assert!(matches!(parse_input("%scf\n  MaxIter 5\n"), Err(InputParseError::Unterminated { line: 1, .. })));
        assert!(matches!(parse_input("* xyz 0 1\n"), Err(InputParseError::Bad { .. })));
        assert!(matches!(parse_input("%maxcore many\n"), Err(InputParseError::Bad { .. })));
        let doc = parse_input("# note\n! SP HF def2-SVP # trailing\n* xyzfile -1 2 a.xyz\n").unwrap();
        assert_eq!(doc.keywords.len(), 3);
        assert_eq!(doc.geometry.unwrap().charge, -1);
    }

    fn water() -> Molecule {
        Molecule::new(
            vec![
                Atom { element: "O".into(), position: [0.0, 0.0, 0.1173] },
                Atom { element: "H".into(), position: [0.0, 0.7572, -0.4692] },
                Atom { element: "H".into(), position: [0.0, -0.7572, -0.4692] },
            ],
            0,
            1,
        )
        .unwrap()
    }

    fn full_output() -> String {
        let freqs: Vec<f64> = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -131.99, 1595.12, 3657.05];
        let mut modes = vec![vec![0.0; 9]; 9];
        modes[6] = vec![0.0, 0.0, 0.07, 0.0, 0.42, -0.56, 0.0, -0.42, -0.56];
        synth::OutputBuilder::new("water")
            .coordinates(&water())
            .scf(17, "-76.32665184213012")
            .orbitals(&[-20.51, -1.33, -0.69, -0.57, -0.49], &[0.21, 0.30])
            .mulliken(&[("O", -0.3716), ("H", 0.1858), ("H", 0.1858)])
            .loewdin(&[("O", -0.2001), ("H", 0.1000), ("H", 0.1001)])
            .hirshfeld(&[("O", -0.3211), ("H", 0.1605), ("H", 0.1606)])
            .dipole([0.0, 0.0, 0.78], "1.98765")
            .frequencies(&freqs, &modes)
            .thermochemistry("-228.87654321", "-228.93401544")
            .terminate()
    }

    #[test]
    fn parses_every_section() {
        let out = parse_output(&full_output());
        assert!(out.terminated_normally);
        assert!(out.error.is_none());
        assert_eq!(out.scf_energy.as_ref().unwrap().as_str(), "-76.32665184213012");
        assert_eq!(out.gibbs.as_ref().unwrap().as_str(), "-228.93401544");
        assert_eq!(out.enthalpy.as_ref().unwrap().as_str(), "-228.87654321");
        assert_eq!(out.dipole.as_ref().unwrap().as_str(), "1.98765");
        assert!((out.homo_lumo_gap.unwrap() - 0.70).abs() < 1e-9);
        let charges = out.charges.as_ref().unwrap();
        assert_eq!(charges.mulliken.as_ref().unwrap(), &vec![-0.3716, 0.1858, 0.1858]);
        assert_eq!(charges.loewdin.as_ref().unwrap().len(), 3);
        assert_eq!(charges.hirshfeld.as_ref().unwrap()[0], -0.3211);
        let freqs = out.frequencies.as_ref().unwrap();
        assert_eq!(freqs.len(), 9);
        assert_eq!(freqs[6], -131.99);
        let mode = out.mode(6).unwrap();
        assert_eq!(mode.displacement[1], [0.0, 0.42, -0.56]);
        assert_eq!(out.final_geometry.as_ref().unwrap().len(), 3);
        assert_eq!(out.convergence.scf_cycles, Some(17));
        assert_eq!(out.convergence.geometry_converged, None);
    }

    #[test]
    fn parses_opt_energy_and_convergence() {
        let text = synth::OutputBuilder::new("cn9")
            .opt_cycle(1)
            .scf(20, "-1543.60000000000000")
            .opt_cycle(2)
            .scf(9, "-1543.61225634143420")
            .opt_converged()
            .terminate();
        let out = parse_output(&text);
        assert_eq!(out.scf_energy.as_ref().unwrap().as_str(), "-1543.61225634143420");
        assert_eq!(out.scf_energy.as_ref().unwrap().value(), -1543.6122563414342);
        assert_eq!(out.convergence.geometry_converged, Some(true));
        assert_eq!(out.convergence.scf_cycles, Some(9));
        let unconverged = parse_output(&synth::OutputBuilder::new("x").opt_cycle(1).abort());
        assert_eq!(unconverged.convergence.geometry_converged, Some(false));
    }

    #[test]
    fn diagnoses_scf_block_error() {
        let text = synth::OutputBuilder::new("cn9")
            .unknown_block_identifier("SCF", 13, "TIGHTSCF")
            .abort();
        let out = parse_output(&text);
        assert!(!out.terminated_normally);
        let e = out.error.unwrap();
        assert_eq!(e.location, Location::Block("scf".into()));
        assert_eq!(e.offending_token, "TIGHTSCF");
        assert_eq!(e.raw_message, "Unknown identifier in SCF block line 13:\n\nLast token: TIGHTSCF.");
    }

    #[test]
    fn diagnoses_keyword_line_error() {
        let text = synth::OutputBuilder::new("sp").unrecognized_keyword("VV10").abort();
        let e = parse_output(&text).error.unwrap();
        assert_eq!(e.location, Location::KeywordLine);
        assert_eq!(e.offending_token, "VV10");
        assert_eq!(e.raw_message, "UNRECOGNIZED OR DUPLICATED KEYWORD(S) IN SIMPLE INPUT LINE\n\nVV10");
    }

    #[test]
    fn unknown_error_shape_keeps_raw_text() {
        let e = parse_output("SCF NOT CONVERGED\nERROR: something odd happened\n").error.unwrap();
        assert_eq!(e.location, Location::Unknown);
        assert!(e.offending_token.is_empty());
        assert!(e.raw_message.contains("something odd"));
    }

    #[test]
    fn empty_output() {
        let out = parse_output("");
        assert_eq!(out, ParsedOutput::default());
    }

    #[test]
    fn property_queries() {
        let out = parse_output(&full_output());
        assert_eq!(extract_property(&out, "gibbs").unwrap().to_string(), "-228.93401544");
        assert_eq!(extract_property(&out, "TOTAL SCF ENERGY").unwrap().to_string(), "-76.32665184213012");
        for key in PROPERTY_KEYS {
            assert!(matches!(extract_property(&out, key).unwrap(), PropertyValue::Present(_)), "{key}");
        }
        let empty = ParsedOutput::default();
        assert_eq!(extract_property(&empty, "dipole").unwrap(), PropertyValue::Absent);
        assert_eq!(extract_property(&empty, "dipole").unwrap().to_string(), "absent");
        assert!(extract_property(&empty, "spin_density").is_err());
    }

    fn token() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9-]{0,7}"
    }

    fn arb_spec() -> impl Strategy<Value = CalcSpec> {
        (
            prop::sample::select(vec!["OPT", "FREQ", "SP", "OPT_FREQ"]),
            prop::sample::select(vec!["HF", "PBE0", "B3LYP", "wB97M-V"]),
            prop::sample::select(vec!["def2-SVP", "def2-SVPD", "6-31G*"]),
            prop::option::of(prop::sample::select(vec!["D4", "VV10"])),
            1u32..64,
            1u32..8000,
            prop::collection::vec((token(), 0u32..1000), 0..3),
            prop::option::of(token()),
            -3i32..3,
            1u32..5,
        )
            .prop_map(|(rt, f, b, d, np, mc, scf, solvent, charge, mult)| {
                let mut s = CalcSpec::minimal("mol.xyz");
                s.runtypes = RunType::parse_set(rt).unwrap();
                s.functional = f.into();
                s.basis = b.into();
                s.dispersion = d.map(Into::into);
                s.nprocs = np;
                s.maxcore = mc;
                s.scf_block = scf.into_iter().map(|(k, v)| BlockEntry::new(&k, v)).collect();
                s.cpcm_block = solvent;
                s.geometry.charge = charge;
                s.geometry.multiplicity = mult;
                s
            })
    }

    proptest! {
        #[test]
        fn render_is_injective(a in arb_spec(), b in arb_spec()) {
            let (ta, tb) = (render_input(&a).unwrap(), render_input(&b).unwrap());
            // the combined CPCM token may coincide with an explicit one
            prop_assume!(a.cpcm_block.is_none() && b.cpcm_block.is_none());
            prop_assert_eq!(a == b, ta == tb);
        }

        #[test]
        fn rendered_text_parses_back(s in arb_spec()) {
            let text = render_input(&s).unwrap();
            let doc = parse_input(&text).unwrap();
            prop_assert_eq!(doc.keywords.iter().map(|k| k.1.clone()).collect::<Vec<_>>(), s.keyword_tokens());
            prop_assert_eq!(doc.nprocs(), Some(s.nprocs));
            prop_assert_eq!(doc.maxcore, Some(s.maxcore));
            prop_assert_eq!(doc.geometry.as_ref(), Some(&s.geometry));
        }

        #[test]
        fn decimal_fields_round_trip(int in 1u32..5000, frac in 0u64..10u64.pow(14)) {
            let energy = format!("-{int}.{frac:014}");
            let text = synth::OutputBuilder::new("x").scf(5, &energy).thermochemistry(&energy, &energy).terminate();
            let out = parse_output(&text);
            prop_assert_eq!(out.scf_energy.as_ref().unwrap().as_str(), energy.as_str());
            prop_assert_eq!(out.gibbs.as_ref().unwrap().as_str(), energy.as_str());
        }
    }
}
