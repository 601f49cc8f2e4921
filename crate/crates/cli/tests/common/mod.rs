#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use nodctx_cli::tables::{write_csv, FeatureRow, ManifestRow};
use nodctx_core::context::StructureClass;
use nodctx_core::metaimage::write_mask;
use nodctx_core::{Grid, Mask, Spacing};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodctx"))
}

/// Run the binary with `--set` overrides; returns (exit code, stdout, stderr).
pub fn nodctx(cmd: &str, sets: &[(&str, String)]) -> (i32, String, String) {
    let mut c = bin();
    c.arg(cmd);
    for (k, v) in sets {
        c.arg("--set").arg(format!("{k}={v}"));
    }
    let out = c.output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn path(p: &Path) -> String {
    p.display().to_string()
}

pub fn cube_grid(n: usize) -> Grid {
    Grid::new([n; 3], Spacing::new(1.0, 1.0, 1.0).unwrap(), [0.0; 3]).unwrap()
}

pub fn ball(grid: Grid, c: [f64; 3], r: f64) -> Mask {
    let mut m = Mask::empty(grid);
    for i in 0..grid.len() {
        let p = grid.index_center_mm(i);
        let d2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
        if d2 <= r * r {
            m.data_mut()[i] = true;
        }
    }
    m
}

/// Voxels within `r` of the segment `a`–`b`.
pub fn tube(grid: Grid, a: [f64; 3], b: [f64; 3], r: f64) -> Mask {
    let mut m = Mask::empty(grid);
    let ab: Vec<f64> = (0..3).map(|k| b[k] - a[k]).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    for i in 0..grid.len() {
        let p = grid.index_center_mm(i);
        let t = ((0..3).map(|k| (p[k] - a[k]) * ab[k]).sum::<f64>() / len2).clamp(0.0, 1.0);
        let d2: f64 = (0..3).map(|k| (p[k] - a[k] - t * ab[k]).powi(2)).sum();
        if d2 <= r * r {
            m.data_mut()[i] = true;
        }
    }
    m
}

pub fn union(masks: &[Mask]) -> Mask {
    let mut out = masks[0].clone();
    for m in &masks[1..] {
        out = out.union(m).unwrap();
    }
    out
}

pub fn save_mask(dir: &Path, patient_id: &str, m: &Mask) {
    std::fs::create_dir_all(dir).unwrap();
    write_mask(&dir.join(format!("{patient_id}.mhd")), m).unwrap();
}

pub struct Reader<'a> {
    pub id: &'a str,
    pub malignancy: Option<u8>,
    pub texture: Option<u8>,
}

/// One nodule drawn as a ball: per-slice closed contours of its section.
pub struct Drawn {
    pub center: [f64; 3],
    pub radius: f64,
}

fn contour(cx: f64, cy: f64, r: f64) -> Vec<[i64; 2]> {
    let mut pts: Vec<[i64; 2]> = Vec::new();
    for k in 0..48 {
        let a = k as f64 * std::f64::consts::TAU / 48.0;
        let p = [(cx + r * a.cos()).round() as i64, (cy + r * a.sin()).round() as i64];
        if pts.last() != Some(&p) && pts.first() != Some(&p) {
            pts.push(p);
        }
    }
    pts
}

/// LIDC-style XML where every reader marks every nodule in `nodules`.
pub fn annotation_xml(patient_id: &str, grid: &Grid, readers: &[Reader], nodules: &[Drawn]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<LidcReadMessage xmlns=\"http://www.nih.gov\">\n<ResponseHeader><PatientID>{patient_id}</PatientID></ResponseHeader>"
    );
    for r in readers {
        let _ = writeln!(s, "<readingSession><servicingRadiologistID>{}</servicingRadiologistID>", r.id);
        for (k, n) in nodules.iter().enumerate() {
            let _ = writeln!(s, "<unblindedReadNodule><noduleID>N{k}</noduleID><characteristics>");
            if let Some(t) = r.texture {
                let _ = writeln!(s, "<texture>{t}</texture>");
            }
            if let Some(m) = r.malignancy {
                let _ = writeln!(s, "<malignancy>{m}</malignancy>");
            }
            s.push_str("</characteristics>\n");
            let sz = grid.spacing.as_array()[2];
            for z in 0..grid.dims[2] {
                let zc = grid.origin[2] + z as f64 * sz;
                let dz = zc - n.center[2];
                let rz2 = n.radius * n.radius - dz * dz;
                if rz2 < 2.25 {
                    continue;
                }
                let cx = (n.center[0] - grid.origin[0]) / grid.spacing.as_array()[0];
                let cy = (n.center[1] - grid.origin[1]) / grid.spacing.as_array()[1];
                let _ = writeln!(s, "<roi><imageZposition>{zc}</imageZposition><inclusion>TRUE</inclusion>");
                for p in contour(cx, cy, rz2.sqrt() / grid.spacing.as_array()[0]) {
                    let _ = writeln!(s, "<edgeMap><xCoord>{}</xCoord><yCoord>{}</yCoord></edgeMap>", p[0], p[1]);
                }
                s.push_str("</roi>\n");
            }
            s.push_str("</unblindedReadNodule>\n");
        }
        s.push_str("</readingSession>\n");
    }
    s.push_str("</LidcReadMessage>\n");
    s
}

pub fn manifest_row(nodule_id: &str, patient_id: &str, label: &str, eqd: f64, texture: Option<f64>) -> ManifestRow {
    let score = match label {
        "benign" => 2.0,
        "malignant" => 4.0,
        _ => 3.0,
    };
    ManifestRow {
        nodule_id: nodule_id.into(),
        patient_id: patient_id.into(),
        n_readers: 1,
        mean_score: score,
        proxy_label: label.into(),
        eq_diameter_mm: eqd,
        centroid_x_mm: 0.0,
        centroid_y_mm: 0.0,
        centroid_z_mm: 0.0,
        mean_pairwise_diff: 0.0,
        mean_texture: texture,
    }
}

/// Feature rows for one nodule: the given pleura distance and tubular
/// features `(distance, count, nvol)` copied to both choices of every class.
pub fn feature_rows(nodule_id: &str, patient_id: &str, pleura: Option<f64>, tubular: (f64, usize, f64)) -> Vec<FeatureRow> {
    StructureClass::ALL
        .into_iter()
        .map(|class| {
            let mut r = FeatureRow::unavailable(nodule_id, patient_id, class);
            if class.is_tubular() {
                r.distance_mm = Some(tubular.0);
                r.count_c1 = Some(tubular.1);
                r.count_c2 = Some(tubular.1);
                r.nvol_c1_pct = Some(tubular.2);
                r.nvol_c2_pct = Some(tubular.2);
                r.n_i = Some(0);
                r.n_ii = Some(0);
                r.n_iii = Some(0);
            } else {
                r.distance_mm = pleura;
            }
            r
        })
        .collect()
}

pub fn write_tables(out: &Path, manifest: &[ManifestRow], features: &[FeatureRow]) {
    std::fs::create_dir_all(out).unwrap();
    write_csv(&out.join("manifest.csv"), manifest).unwrap();
    write_csv(&out.join("features.csv"), features).unwrap();
}

pub fn write_ids(p: &Path, ids: impl IntoIterator<Item = String>) -> PathBuf {
    let text: String = ids.into_iter().map(|s| s + "\n").collect();
    std::fs::write(p, text).unwrap();
    p.to_path_buf()
}
