mod common;

use std::path::{Path, PathBuf};

use common::*;
use nodctx_cli::tables::{read_csv, FeatureRow, ManifestRow};
use nodctx_core::context::StructureClass;
use nodctx_core::Mask;
use serde_json::Value;

struct Scene {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Scene {
    fn out(&self) -> PathBuf {
        self.root.join("out")
    }

    fn sets(&self) -> Vec<(&'static str, String)> {
        let r = &self.root;
        vec![
            ("annotations_dir", path(&r.join("xml"))),
            ("mask_dir.lung", path(&r.join("lung"))),
            ("mask_dir.airway", path(&r.join("airway"))),
            ("mask_dir.vessel", path(&r.join("vessel"))),
            ("output_dir", path(&self.out())),
        ]
    }
}

/// Ball nodule of radius 5 mm at the center of a 48 mm cube with three
/// vessels: one touching it, one whose axis runs 2 mm from its surface, and
/// one 4 mm away running past it.
fn vessels(grid: nodctx_core::Grid) -> Mask {
    union(&[
        tube(grid, [30.0, 24.0, 24.0], [42.0, 24.0, 24.0], 1.0),
        tube(grid, [24.0, 17.0, 18.0], [24.0, 17.0, 30.0], 1.0),
        tube(grid, [16.0, 24.0, 15.0], [32.0, 24.0, 15.0], 1.0),
    ])
}

fn scene(patients: &[(&str, &[(&str, u8)])]) -> Scene {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let grid = cube_grid(48);
    let mut lung = Mask::empty(grid);
    for z in 2..46 {
        for y in 2..46 {
            for x in 2..46 {
                lung.set(x, y, z, true);
            }
        }
    }
    std::fs::create_dir_all(root.join("xml")).unwrap();
    for (pid, reads) in patients {
        let readers: Vec<Reader> = reads
            .iter()
            .map(|(id, m)| Reader {
                id,
                malignancy: Some(*m),
                texture: Some(5),
            })
            .collect();
        let nodule = Drawn {
            center: [24.0, 24.0, 24.0],
            radius: 5.0,
        };
        std::fs::write(root.join("xml").join(format!("{pid}.xml")), annotation_xml(pid, &grid, &readers, &[nodule]))
            .unwrap();
        save_mask(&root.join("lung"), pid, &lung);
        save_mask(&root.join("airway"), pid, &Mask::empty(grid));
        save_mask(&root.join("vessel"), pid, &vessels(grid));
    }
    Scene { _dir: dir, root }
}

fn run_ok(cmd: &str, sets: &[(&str, String)]) -> String {
    let (code, out, err) = nodctx(cmd, sets);
    assert_eq!(code, 0, "{cmd} failed: {err}");
    out
}

fn features(out: &Path) -> Vec<FeatureRow> {
    read_csv(&out.join("features.csv")).unwrap()
}

#[test]
fn phantom_scene_counts() {
    let s = scene(&[("P1", &[("r1", 4), ("r2", 5)])]);
    run_ok("ingest", &s.sets());
    run_ok("quantify", &s.sets());
    let rows = features(&s.out());
    assert_eq!(rows.len(), StructureClass::ALL.len());

    let vessel = rows.iter().find(|r| r.class == StructureClass::Vessel).unwrap();
    assert_eq!(vessel.count_c1, Some(3));
    assert_eq!(vessel.count_c2, Some(2));
    assert_eq!(vessel.distance_mm, Some(0.0));
    let c1 = vessel.nvol_c1_pct.unwrap();
    let c2 = vessel.nvol_c2_pct.unwrap();
    assert!(c2 > 0.0 && c2 < c1, "{c2} vs {c1}");

    let airway = rows.iter().find(|r| r.class == StructureClass::Airway).unwrap();
    assert_eq!(airway.distance_mm, None);
    assert_eq!((airway.count_c1, airway.count_c2), (Some(0), Some(0)));
    assert_eq!(airway.nvol_c1_pct, Some(0.0));

    let pleura = rows.iter().find(|r| r.class == StructureClass::Pleura).unwrap();
    assert!(pleura.distance_mm.unwrap() > 10.0);
    assert_eq!(pleura.count_c1, None);

    // no artery or vein directory configured
    let artery = rows.iter().find(|r| r.class == StructureClass::Artery).unwrap();
    assert_eq!(*artery, FeatureRow::unavailable(&vessel.nodule_id, "P1", StructureClass::Artery));

    let text = std::fs::read_to_string(s.out().join("features.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "nodule_id,patient_id,class,distance_mm,count_c1,count_c2,nvol_c1_pct,nvol_c2_pct,n_i,n_ii,n_iii"
    );
    assert!(text.contains("P1-01,P1,artery,,,,,,,,"));
}

#[test]
fn quantify_rerun_is_byte_identical() {
    let s = scene(&[("P1", &[("r1", 4)]), ("P2", &[("r1", 1), ("r2", 2)])]);
    run_ok("ingest", &s.sets());
    run_ok("quantify", &s.sets());
    let first = std::fs::read(s.out().join("features.csv")).unwrap();
    let mut sets = s.sets();
    sets.push(("workers", "1".into()));
    run_ok("quantify", &sets);
    assert_eq!(first, std::fs::read(s.out().join("features.csv")).unwrap());
}

#[test]
fn ingest_cohort_and_uncertain_exclusion() {
    let s = scene(&[
        ("P1", &[("r1", 4), ("r2", 5)]),
        ("P2", &[("r1", 1), ("r2", 2), ("r3", 2)]),
        ("P3", &[("r1", 3), ("r2", 2), ("r3", 4)]),
    ]);
    let summary = run_ok("ingest", &s.sets());
    assert!(summary.contains("1 benign, 1 malignant, 1 uncertain"), "{summary}");
    let manifest: Vec<ManifestRow> = read_csv(&s.out().join("manifest.csv")).unwrap();
    let pids: Vec<&str> = manifest.iter().map(|m| m.patient_id.as_str()).collect();
    assert_eq!(pids, ["P1", "P2", "P3"]);
    let p3 = &manifest[2];
    assert_eq!((p3.proxy_label.as_str(), p3.n_readers, p3.mean_score), ("uncertain", 3, 3.0));
    assert!((p3.mean_pairwise_diff - 4.0 / 3.0).abs() < 1e-12);
    // rasterized ball of radius 5 mm
    assert!((manifest[0].eq_diameter_mm - 10.0).abs() < 1.0, "{}", manifest[0].eq_diameter_mm);
    assert!(s.out().join("nodules/P1-01.mhd").is_file());
    assert!(s.out().join("run_config.ingest.txt").is_file());

    run_ok("quantify", &s.sets());
    run_ok("analyze", &s.sets());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(s.out().join("analysis.json")).unwrap()).unwrap();
    assert_eq!(report["cohort"]["nodules"], 2);
    assert_eq!(report["cohort"]["uncertain_excluded"], 1);
    run_ok("report", &s.sets());
    assert!(std::fs::read_to_string(s.out().join("report.md")).unwrap().contains("1 uncertain excluded"));
}

#[test]
fn empty_annotation_dir_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let xml = dir.path().join("xml");
    std::fs::create_dir_all(&xml).unwrap();
    let (code, _, err) = nodctx(
        "ingest",
        &[("annotations_dir", path(&xml)), ("output_dir", path(&dir.path().join("out")))],
    );
    assert_eq!(code, 2);
    assert!(err.contains("no .xml annotation files"), "{err}");
}

#[test]
fn grid_mismatch_is_an_input_error() {
    let s = scene(&[("P1", &[("r1", 4)])]);
    run_ok("ingest", &s.sets());
    save_mask(&s.root.join("vessel"), "P1", &Mask::empty(cube_grid(40)));
    let (code, _, err) = nodctx("quantify", &s.sets());
    assert_eq!(code, 2);
    assert!(err.contains("does not match"), "{err}");
}

#[test]
fn bad_config_is_an_input_error() {
    let (code, _, err) = nodctx("analyze", &[("no_such_key", "1".into())]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown config key"), "{err}");
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("run.cfg");
    std::fs::write(&f, "# test\nfilter.d_near_mm = 2.0\nmodel.choice = 1\n").unwrap();
    let out = bin()
        .args(["config", "--config"])
        .arg(&f)
        .args(["--set", "model.choice=2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("filter.d_near_mm = 2.0\n"));
    assert!(text.contains("model.choice = 2\n"));
}

#[test]
fn anisotropic_scan_is_resampled_before_quantification() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let grid = nodctx_core::Grid::new([48, 48, 24], nodctx_core::Spacing::new(1.0, 1.0, 2.0).unwrap(), [0.0; 3]).unwrap();
    std::fs::create_dir_all(root.join("xml")).unwrap();
    let readers = [Reader {
        id: "r1",
        malignancy: Some(2),
        texture: None,
    }];
    let nodule = Drawn {
        center: [24.0, 24.0, 24.0],
        radius: 5.0,
    };
    std::fs::write(root.join("xml/A1.xml"), annotation_xml("A1", &grid, &readers, &[nodule])).unwrap();
    save_mask(&root.join("vessel"), "A1", &vessels(grid));
    let sets = vec![
        ("annotations_dir", path(&root.join("xml"))),
        ("mask_dir.vessel", path(&root.join("vessel"))),
        ("output_dir", path(&root.join("out"))),
    ];
    run_ok("ingest", &sets);
    run_ok("quantify", &sets);
    let rows = features(&root.join("out"));
    let vessel = rows.iter().find(|r| r.class == StructureClass::Vessel).unwrap();
    assert_eq!(vessel.count_c1, Some(3));
    assert_eq!(vessel.count_c2, Some(2));
    // no lung mask, so no pleura
    let pleura = rows.iter().find(|r| r.class == StructureClass::Pleura).unwrap();
    assert_eq!(pleura.distance_mm, None);
}
