mod common;

use std::path::Path;

use common::*;
use nodctx_cli::tables::{read_csv, FeatureRow, ManifestRow};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn analyze(out: &Path, extra: &[(&str, String)]) -> (i32, String) {
    let mut sets = vec![("output_dir", path(out))];
    sets.extend(extra.iter().cloned());
    let (code, _, err) = nodctx("analyze", &sets);
    (code, err)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap()
}

fn entry<'a>(r: &'a Value, feature: &str, attribute: &str) -> &'a Value {
    r["contingency"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["feature"] == feature && e["attribute"] == attribute)
        .unwrap_or_else(|| panic!("no {feature} x {attribute} entry"))
}

/// Cohort whose pleura distances reproduce the table
/// benign <= 1 mm: 407, malignant <= 1 mm: 253, benign > 1 mm: 637, malignant > 1 mm: 259.
fn pleura_cohort(out: &Path) {
    let mut manifest = Vec::new();
    let mut features = Vec::new();
    let groups = [("benign", 0.5, 407), ("malignant", 0.5, 253), ("benign", 3.0, 637), ("malignant", 3.0, 259)];
    let mut k = 0;
    for (label, dist, n) in groups {
        for _ in 0..n {
            let id = format!("N{k:04}");
            let pid = format!("P{k:04}");
            let eqd = if k % 3 == 0 { 12.0 } else { 8.0 };
            manifest.push(manifest_row(&id, &pid, label, eqd, Some(if k % 4 == 0 { 2.0 } else { 5.0 })));
            features.extend(feature_rows(&id, &pid, Some(dist), (2.0, k % 7, (k % 5) as f64)));
            k += 1;
        }
    }
    write_tables(out, &manifest, &features);
}

#[test]
fn pleura_table_from_features() {
    let dir = tempfile::tempdir().unwrap();
    pleura_cohort(dir.path());
    let (code, err) = analyze(dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let r = report(dir.path());
    assert_eq!(r["cohort"]["nodules"], 1556);
    assert_eq!(r["cohort"]["benign"], 1044);
    let e = entry(&r, "pleura.distance_mm", "malignancy");
    assert_eq!(e["cells"], serde_json::json!([[407, 253], [637, 259]]));
    assert_eq!(e["columns"], serde_json::json!(["benign", "malignant"]));
    let or = e["odds_ratio"].as_f64().unwrap();
    let chi = e["chi_square"].as_f64().unwrap();
    assert!((or - 0.654).abs() < 1e-3, "{or}");
    assert!((chi - 15.30).abs() < 0.01, "{chi}");
    let t = entry(&r, "pleura.distance_mm", "texture");
    assert_eq!(t["columns"], serde_json::json!(["solid", "part-solid"]));
    // vessel count choice 2 uses the vessel cutoff
    assert_eq!(entry(&r, "vessel.count_c2", "eq_diameter")["cutoff"], 3.0);
}

#[test]
fn supplied_tables_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    pleura_cohort(dir.path());
    let tables = dir.path().join("tables.csv");
    std::fs::write(
        &tables,
        "label,t11,t12,t21,t22\npleura,407,253,637,259\nproportional,10,20,30,60\nzero cell,5,0,3,4\n",
    )
    .unwrap();
    let (code, err) = analyze(dir.path(), &[("tables_csv", path(&tables))]);
    assert_eq!(code, 0, "{err}");
    let r = report(dir.path());
    let t = r["tables"].as_array().unwrap();
    assert_eq!(t.len(), 3);
    assert!((t[0]["odds_ratio"].as_f64().unwrap() - 0.654).abs() < 1e-3);
    assert!((t[0]["chi_square"].as_f64().unwrap() - 15.30).abs() < 0.01);
    assert_eq!(t[1]["chi_square"].as_f64().unwrap(), 0.0);
    assert!((t[1]["p_value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(t[2]["odds_ratio"], "inf");
    assert!(t[2]["note"].as_str().unwrap().contains("infinite"));
}

#[test]
fn row_order_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    pleura_cohort(&a);
    let mut manifest: Vec<ManifestRow> = read_csv(&a.join("manifest.csv")).unwrap();
    let mut features: Vec<FeatureRow> = read_csv(&a.join("features.csv")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    manifest.shuffle(&mut rng);
    features.shuffle(&mut rng);
    write_tables(&b, &manifest, &features);
    assert_eq!(analyze(&a, &[]).0, 0);
    assert_eq!(analyze(&b, &[]).0, 0);
    assert_eq!(
        std::fs::read(a.join("analysis.json")).unwrap(),
        std::fs::read(b.join("analysis.json")).unwrap()
    );
}

#[test]
fn duplicate_feature_rows_are_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    pleura_cohort(dir.path());
    let mut features: Vec<FeatureRow> = read_csv(&dir.path().join("features.csv")).unwrap();
    features.push(features[0].clone());
    let manifest: Vec<ManifestRow> = read_csv(&dir.path().join("manifest.csv")).unwrap();
    write_tables(dir.path(), &manifest, &features);
    assert_eq!(analyze(dir.path(), &[]).0, 2);
}

#[test]
fn single_class_cohort_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest: Vec<ManifestRow> =
        (0..5).map(|k| manifest_row(&format!("N{k}"), &format!("P{k}"), "benign", 8.0, None)).collect();
    let features: Vec<FeatureRow> = (0..5)
        .flat_map(|k| feature_rows(&format!("N{k}"), &format!("P{k}"), Some(1.0), (1.0, 1, 1.0)))
        .collect();
    write_tables(dir.path(), &manifest, &features);
    let (code, err) = analyze(dir.path(), &[]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn group_comparison_and_correlation_shape() {
    let dir = tempfile::tempdir().unwrap();
    pleura_cohort(dir.path());
    assert_eq!(analyze(dir.path(), &[("stats.ttest", "welch".into())]).0, 0);
    let r = report(dir.path());
    let g = r["group_comparisons"].as_array().unwrap();
    let eqd = g.iter().find(|e| e["feature"] == "eq_diameter_mm").unwrap();
    assert_eq!(eqd["benign"]["n"], 1044);
    assert_eq!(eqd["malignant"]["n"], 512);
    let c = &r["correlation"];
    let names = c["features"].as_array().unwrap();
    let n = names.len();
    let ms = names.iter().position(|f| f == "mean_score").unwrap();
    assert_eq!(c["r"][ms][ms], 1.0);
    for i in 0..n {
        // constant columns have no correlation
        assert!(c["r"][i][i] == 1.0 || c["r"][i][i].is_null());
        for j in 0..n {
            assert_eq!(c["r"][i][j], c["r"][j][i]);
        }
    }
}
