//! Annotation files to fused nodule records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nodctx_core::annotation::{fuse_cluster, group_reads, read_annotation_file, read_diagnoses};
use nodctx_core::metaimage::write_mask;
use nodctx_core::{NoduleRecord, ProxyLabel, RadiologistRead};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};
use crate::scan::reference_grid;
use crate::tables::{write_csv, ManifestRow, MANIFEST};

pub const NODULE_DIR: &str = "nodules";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub patients: usize,
    pub benign: usize,
    pub malignant: usize,
    pub uncertain: usize,
    /// Marks skipped at parse time (small nodules, missing malignancy).
    pub excluded_marks: usize,
    /// Reads whose contours fell outside the scan.
    pub empty_reads: usize,
}

impl IngestSummary {
    pub fn nodules(&self) -> usize {
        self.benign + self.malignant + self.uncertain
    }
}

pub fn nodule_mask_path(out: &Path, nodule_id: &str) -> PathBuf {
    out.join(NODULE_DIR).join(format!("{nodule_id}.mhd"))
}

fn annotation_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .input_ctx(|| format!("reading annotation directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(format!("no .xml annotation files in {}", dir.display())));
    }
    Ok(files)
}

struct PatientNodules {
    patient_id: String,
    records: Vec<NoduleRecord>,
    excluded_marks: usize,
    empty_reads: usize,
}

fn ingest_file(cfg: &RunConfig, path: &Path) -> CliResult<PatientNodules> {
    let parsed = read_annotation_file(path).input_ctx(|| format!("parsing {}", path.display()))?;
    let patient_id = match &parsed.patient_id {
        Some(p) => p.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::input(format!("cannot derive a patient id from {}", path.display())))?,
    };
    let grid = reference_grid(cfg, &patient_id)?;
    let mut reads = Vec::new();
    let mut empty_reads = 0;
    for (reader, mark) in parsed.eligible() {
        let read = RadiologistRead::from_mark(reader, mark, &grid)
            .input_ctx(|| format!("{}: reader {reader}, nodule {}", path.display(), mark.nodule_id))?;
        if read.voxels.is_empty() {
            empty_reads += 1;
        } else {
            reads.push(read);
        }
    }
    let records = group_reads(&reads, &grid)
        .into_iter()
        .enumerate()
        .map(|(k, members)| {
            let refs: Vec<&RadiologistRead> = members.iter().map(|&i| &reads[i]).collect();
            fuse_cluster(format!("{patient_id}-{:02}", k + 1), patient_id.as_str(), &refs, &grid)
                .input_ctx(|| format!("fusing nodule {} of {}", k + 1, path.display()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(PatientNodules {
        patient_id,
        records,
        excluded_marks: parsed.excluded_count(),
        empty_reads,
    })
}

/// Parse, fuse and write the manifest plus one cropped mask per nodule.
pub fn run(cfg: &RunConfig) -> CliResult<IngestSummary> {
    let dir = cfg.require(&cfg.annotations_dir, "annotations_dir")?;
    let files = annotation_files(dir)?;
    if let Some(d) = &cfg.diagnosis_csv {
        let n = read_diagnoses(d).input_ctx(|| format!("reading {}", d.display()))?.len();
        log::info!("{n} patient diagnoses in {}", d.display());
    }

    let patients: Vec<PatientNodules> = files
        .par_iter()
        .map(|f| ingest_file(cfg, f))
        .collect::<CliResult<Vec<_>>>()?;

    let mut seen = BTreeMap::new();
    for (p, f) in patients.iter().zip(&files) {
        if let Some(prev) = seen.insert(p.patient_id.clone(), f) {
            return Err(CliError::input(format!(
                "patient {} appears in both {} and {}",
                p.patient_id,
                prev.display(),
                f.display()
            )));
        }
    }

    let mut summary = IngestSummary {
        patients: patients.len(),
        ..Default::default()
    };
    let mut rows = Vec::new();
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out.join(NODULE_DIR)).input_ctx(|| format!("creating {}", out.display()))?;
    for p in &patients {
        summary.excluded_marks += p.excluded_marks;
        summary.empty_reads += p.empty_reads;
        for r in &p.records {
            match r.proxy_label {
                ProxyLabel::Benign => summary.benign += 1,
                ProxyLabel::Malignant => summary.malignant += 1,
                ProxyLabel::Uncertain => summary.uncertain += 1,
            }
            let mask = r.fused_mask();
            let (lo, hi) = mask.bounding_box().expect("fused mask is nonempty");
            let target = nodule_mask_path(out, &r.nodule_id);
            write_mask(&target, &mask.crop(lo, hi)).input_ctx(|| format!("writing {}", target.display()))?;
            rows.push(ManifestRow::from_record(r));
        }
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("no eligible nodules in {}", dir.display())));
    }
    write_csv(&out.join(MANIFEST), &rows)?;
    Ok(summary)
}
