//! The F1 fixture: a small DGP sample checked in as CSV, with expected values
//! from the exact-rational oracle checked in as JSON.

mod common;

use common::*;
use endocheck::data::{write_csv, CsvNames};

/// Rewrites `fixtures/f1.csv` and `fixtures/f1_expected.json`.
/// Run with `cargo test -p endocheck --test fixtures -- --ignored`.
#[test]
#[ignore]
fn regenerate_f1() {
    let ds = f1_generated();
    let names = CsvNames::default_for(&ds, true);
    let mut buf = Vec::new();
    write_csv(&ds, &names, &mut buf).unwrap();
    std::fs::create_dir_all(fixture_dir()).unwrap();
    std::fs::write(f1_csv(), &buf).unwrap();

    // Expected values are computed from the file as written.
    let loaded = load_f1();
    let values = oracle_values(&loaded);
    let mut json = serde_json::to_string_pretty(&values).unwrap();
    json.push('\n');
    std::fs::write(f1_expected_path(), json).unwrap();
}

#[test]
fn f1_csv_matches_generator() {
    let generated = f1_generated();
    let loaded = load_f1();
    assert_eq!(loaded, generated, "f1.csv must round-trip the DGP draw bit for bit");
    assert_eq!((loaded.n(), loaded.d_y1(), loaded.d_z1(), loaded.d_z2()), (16, 1, 1, 2));
}

#[test]
fn f1_expected_matches_oracle() {
    let recomputed = oracle_values(&load_f1());
    assert_eq!(recomputed, load_f1_expected());
}
