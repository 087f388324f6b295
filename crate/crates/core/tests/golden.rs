use std::fs;
use std::path::PathBuf;

use qfl_core::experiment::{GRADNORMS_HEADER, ROUNDS_HEADER};
use qfl_core::{build_model, AnsatzShape, ModelVariant};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against the stored file; `QFL_BLESS=1` rewrites it instead.
fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("QFL_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} changed; rerun with QFL_BLESS=1 if intended"
    );
}

#[test]
fn circuit_dumps() {
    for variant in ModelVariant::ALL {
        for shape in AnsatzShape::ALL {
            let m = build_model(variant, shape, 4, 3).unwrap();
            check_golden(
                &format!("{}_{}_q4_d3.txt", variant.name(), shape.name()),
                &m.circuit_dump(),
            );
        }
    }
    let m = build_model(ModelVariant::Funnel, AnsatzShape::VShape, 10, 6).unwrap();
    check_golden("funnel_vshape_q10_d6.txt", &m.circuit_dump());
}

#[test]
fn csv_headers() {
    let text = format!(
        "{}\n{}\n",
        ROUNDS_HEADER.join(","),
        GRADNORMS_HEADER.join(",")
    );
    check_golden("csv_headers.txt", &text);
}
