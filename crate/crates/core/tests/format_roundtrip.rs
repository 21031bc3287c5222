mod common;

use common::*;
use fkb_core::format::FormatErrorKind;
use fkb_core::rng;
use fkb_core::{parse_model, serialize_model, validate_spec, Network};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialize_then_parse_is_bit_exact(seed in any::<u64>()) {
        let spec = random_spec(&mut rng::stream(seed));
        let text = serialize_model(&spec).unwrap();
        let back = parse_model(&text).unwrap();
        prop_assert!(back.bit_eq(&spec));
        prop_assert_eq!(serialize_model(&back).unwrap(), text);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        if let Err(e) = parse_model(&bytes) {
            prop_assert!(e.line >= 1);
        }
    }

    #[test]
    fn parser_never_panics_on_line_soup(
        lines in prop::collection::vec(
            prop::sample::select(vec![
                "FKBX 1", "FKBX 2", "layers 1", "layers 2", "input 2", "input 0",
                "dense 2 linear 0", "dense 1 softmax 0", "dropout 0.5", "dropout 1.5",
                "batchnorm 0.001", "b 0 0", "W 1 0", "W 0 1", "gamma 1 1", "beta 0 0",
                "mean 0 0", "variance 1 1", "variance -1 1", "conv 3", "# note", "",
                "W nan 0", "b 1e999 0",
            ]),
            0..14,
        )
    ) {
        let text = lines.join("\n");
        match parse_model(&text) {
            Ok(spec) => prop_assert!(validate_spec(&spec).is_empty()),
            Err(e) => prop_assert!(e.line >= 1 && e.line <= lines.len().max(1)),
        }
    }
}

#[test]
fn identity_fixture_predicts_its_input() {
    let spec = parse_model(std::fs::read(fixture("identity.fkbx")).unwrap()).unwrap();
    let net = Network::from_spec(&spec).unwrap();
    assert_eq!(net.predict(&[0.25, -3.0]).unwrap(), [0.25, -3.0]);
}

#[test]
fn fixtures_are_in_canonical_form() {
    for name in ["linear_init.fkbx", "xor_init.fkbx"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        assert_eq!(serialize_model(&parse_model(&text).unwrap()).unwrap(), text, "{name}");
    }
}

fn kind_name(kind: &FormatErrorKind) -> &'static str {
    match kind {
        FormatErrorKind::BadMagic => "bad-magic",
        FormatErrorKind::Syntax(_) => "syntax",
        FormatErrorKind::DimensionMismatch(_) => "dimension",
        FormatErrorKind::Domain(_) => "domain",
        FormatErrorKind::UnsupportedLayer(_) => "unsupported",
    }
}

#[test]
fn error_kinds_and_lines() {
    let cases = [
        ("FKB 1\n", "bad-magic", 1),
        ("FKBX 1\nlayers x\n", "syntax", 2),
        ("FKBX 1\nlayers 1\ninput 2\ndense 2 linear 0\nb 0 0\nW 1 0 0\nW 0 1\n", "dimension", 6),
        ("FKBX 1\nlayers 1\ninput 2\ndropout 1.5\n", "domain", 4),
        ("FKBX 1\nlayers 1\ninput 2\nconv 3 3\n", "unsupported", 4),
    ];
    for (text, kind, line) in cases {
        let err = parse_model(text).unwrap_err();
        assert_eq!((kind_name(&err.kind), err.line), (kind, line), "{text:?}: {err}");
    }
}

#[test]
fn case_study_shape_round_trips() {
    let spec = case_study_spec(11, 512, 0.1, true, 0.1, 9);
    assert_eq!((spec.input_dim, spec.output_dim()), (94, 65));
    let back = parse_model(serialize_model(&spec).unwrap()).unwrap();
    assert!(back.bit_eq(&spec));
}
