//! CSV tables passed between pipeline stages.

use std::path::Path;

use nodctx_core::context::{ConditionHistogram, StructureClass, StructureFeatures};
use nodctx_core::{NoduleRecord, ProxyLabel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, InputContext};

pub const MANIFEST: &str = "manifest.csv";
pub const FEATURES: &str = "features.csv";

/// One fused nodule: `nodule_id, patient_id, n_readers, mean_score,
/// proxy_label, eq_diameter_mm, centroid_{x,y,z}_mm, mean_pairwise_diff,
/// mean_texture`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub nodule_id: String,
    pub patient_id: String,
    pub n_readers: usize,
    pub mean_score: f64,
    pub proxy_label: String,
    pub eq_diameter_mm: f64,
    pub centroid_x_mm: f64,
    pub centroid_y_mm: f64,
    pub centroid_z_mm: f64,
    pub mean_pairwise_diff: f64,
    pub mean_texture: Option<f64>,
}

impl ManifestRow {
    pub fn from_record(r: &NoduleRecord) -> Self {
        ManifestRow {
            nodule_id: r.nodule_id.clone(),
            patient_id: r.patient_id.clone(),
            n_readers: r.n_readers,
            mean_score: r.mean_score,
            proxy_label: r.proxy_label.name().to_string(),
            eq_diameter_mm: r.eq_diameter_mm,
            centroid_x_mm: r.centroid_mm[0],
            centroid_y_mm: r.centroid_mm[1],
            centroid_z_mm: r.centroid_mm[2],
            mean_pairwise_diff: r.mean_pairwise_diff,
            mean_texture: r.mean_texture,
        }
    }

    pub fn label(&self) -> CliResult<ProxyLabel> {
        self.proxy_label
            .parse()
            .map_err(|e| CliError::input(format!("nodule {}: {e}", self.nodule_id)))
    }

    pub fn centroid(&self) -> [f64; 3] {
        [self.centroid_x_mm, self.centroid_y_mm, self.centroid_z_mm]
    }
}

/// One (nodule, structure class) row. Absent values are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub nodule_id: String,
    pub patient_id: String,
    pub class: StructureClass,
    pub distance_mm: Option<f64>,
    pub count_c1: Option<usize>,
    pub count_c2: Option<usize>,
    pub nvol_c1_pct: Option<f64>,
    pub nvol_c2_pct: Option<f64>,
    pub n_i: Option<usize>,
    pub n_ii: Option<usize>,
    pub n_iii: Option<usize>,
}

impl FeatureRow {
    pub fn new(patient_id: &str, f: StructureFeatures) -> Self {
        let h: Option<ConditionHistogram> = f.conditions;
        FeatureRow {
            nodule_id: f.nodule_id,
            patient_id: patient_id.to_string(),
            class: f.class,
            distance_mm: f.distance_mm,
            count_c1: f.count_c1,
            count_c2: f.count_c2,
            nvol_c1_pct: f.nvol_c1_pct,
            nvol_c2_pct: f.nvol_c2_pct,
            n_i: h.map(|h| h.attached),
            n_ii: h.map(|h| h.near),
            n_iii: h.map(|h| h.projecting),
        }
    }

    /// Row with every feature missing.
    pub fn unavailable(nodule_id: &str, patient_id: &str, class: StructureClass) -> Self {
        FeatureRow {
            nodule_id: nodule_id.to_string(),
            patient_id: patient_id.to_string(),
            class,
            distance_mm: None,
            count_c1: None,
            count_c2: None,
            nvol_c1_pct: None,
            nvol_c2_pct: None,
            n_i: None,
            n_ii: None,
            n_iii: None,
        }
    }

    pub fn count(&self, choice: u8) -> Option<f64> {
        match choice {
            1 => self.count_c1,
            _ => self.count_c2,
        }
        .map(|c| c as f64)
    }

    pub fn nvol(&self, choice: u8) -> Option<f64> {
        match choice {
            1 => self.nvol_c1_pct,
            _ => self.nvol_c2_pct,
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).input_ctx(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r).input_ctx(|| format!("writing {}", path.display()))?;
    }
    w.flush().input_ctx(|| format!("writing {}", path.display()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .input_ctx(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .input_ctx(|| format!("reading {}", path.display()))
}

/// Patient ids, one per line; blank lines and `#` comments ignored.
pub fn read_id_list(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).input_ctx(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
