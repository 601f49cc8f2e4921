//! Per-patient volumes on disk: `<dir>/<patient_id>.mhd`.

use std::path::{Path, PathBuf};

use nodctx_core::metaimage::{read_header, read_mask};
use nodctx_core::{Grid, Mask};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};

/// Mask directories in lookup order.
pub const MASK_KINDS: [&str; 5] = ["lung", "airway", "vessel", "artery", "vein"];

pub fn scan_file(dir: &Path, patient_id: &str) -> PathBuf {
    dir.join(format!("{patient_id}.mhd"))
}

/// Grid the annotations of a patient refer to: the CT header when a CT
/// directory is configured, otherwise the first mask found.
pub fn reference_grid(cfg: &RunConfig, patient_id: &str) -> CliResult<Grid> {
    let mut tried = Vec::new();
    let dirs = cfg
        .ct_dir
        .iter()
        .map(PathBuf::as_path)
        .chain(MASK_KINDS.iter().filter_map(|k| cfg.mask_dir(k)));
    for d in dirs {
        let p = scan_file(d, patient_id);
        if p.is_file() {
            return Ok(read_header(&p).input_ctx(|| format!("reading {}", p.display()))?.grid);
        }
        tried.push(p.display().to_string());
    }
    Err(CliError::input(format!(
        "no scan geometry for patient {patient_id} (tried: {})",
        if tried.is_empty() { "no ct_dir or mask_dir configured".to_string() } else { tried.join(", ") }
    )))
}

/// The `kind` mask of a patient, checked against `grid`. `None` when the
/// directory is not configured or holds no file for the patient.
pub fn load_mask(cfg: &RunConfig, kind: &str, patient_id: &str, grid: &Grid) -> CliResult<Option<Mask>> {
    let Some(dir) = cfg.mask_dir(kind) else {
        return Ok(None);
    };
    let p = scan_file(dir, patient_id);
    if !p.is_file() {
        log::warn!("no {kind} mask for patient {patient_id} at {}", p.display());
        return Ok(None);
    }
    let m = read_mask(&p).input_ctx(|| format!("reading {}", p.display()))?;
    m.grid()
        .ensure_compatible(grid)
        .input_ctx(|| format!("{kind} mask {} does not match the scan grid", p.display()))?;
    Ok(Some(m))
}
