//! Structure masks and fused nodules to the feature table.

use std::collections::BTreeMap;
use std::path::Path;

use nodctx_core::context::{pleural_surface, StructureClass, StructureDistance};
use nodctx_core::metaimage::{read_mask, write_mask};
use nodctx_core::morphology::{extract_branches, skeletonize};
use nodctx_core::volume::make_voi_with_floor;
use nodctx_core::{Grid, Mask, NoduleContext, SkeletonGraph};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};
use crate::ingest::nodule_mask_path;
use crate::scan::{load_mask, reference_grid};
use crate::tables::{read_csv, write_csv, FeatureRow, ManifestRow, FEATURES, MANIFEST};

pub const SKELETON_DIR: &str = "skeletons";

#[derive(Serialize)]
struct BranchRow {
    branch_id: usize,
    n_points: usize,
    length_mm: f64,
    end1_x_mm: f64,
    end1_y_mm: f64,
    end1_z_mm: f64,
    end2_x_mm: f64,
    end2_y_mm: f64,
    end2_z_mm: f64,
}

struct Structure {
    mask: Mask,
    /// Skeleton branches for tubular classes.
    graph: Option<SkeletonGraph>,
}

fn to_isometric(mask: Mask, t: f64) -> CliResult<Mask> {
    if mask.grid().spacing.is_isotropic(t) {
        Ok(mask)
    } else {
        Ok(mask.resample_isometric(t)?)
    }
}

fn load_nodule(out: &Path, nodule_id: &str, grid: &Grid, t: f64) -> CliResult<Mask> {
    let p = nodule_mask_path(out, nodule_id);
    let crop = read_mask(&p).input_ctx(|| format!("reading nodule mask {}", p.display()))?;
    let full = crop
        .embed_into(grid)
        .input_ctx(|| format!("nodule mask {} is not on the scan lattice", p.display()))?;
    let m = to_isometric(full, t)?;
    if m.is_empty() {
        return Err(CliError::input(format!("nodule {nodule_id} vanishes after resampling")));
    }
    Ok(m)
}

fn structures(cfg: &RunConfig, patient_id: &str, grid: &Grid, nodules: &[Mask]) -> CliResult<BTreeMap<StructureClass, Structure>> {
    let t = cfg.resample_spacing_mm;
    let mut raw = BTreeMap::new();
    for kind in crate::scan::MASK_KINDS {
        if let Some(m) = load_mask(cfg, kind, patient_id, grid)? {
            raw.insert(kind, to_isometric(m, t)?);
        }
    }
    if !raw.contains_key("vessel") {
        if let (Some(a), Some(v)) = (raw.get("artery"), raw.get("vein")) {
            let u = a.union(v)?;
            raw.insert("vessel", u);
        }
    }
    let mut out = BTreeMap::new();
    if let Some(lung) = raw.remove("lung") {
        let refs: Vec<&Mask> = nodules.iter().collect();
        out.insert(
            StructureClass::Pleura,
            Structure {
                mask: pleural_surface(&lung, &refs)?,
                graph: None,
            },
        );
    }
    let tubular: Vec<(StructureClass, Mask)> = StructureClass::ALL
        .into_iter()
        .filter(|c| c.is_tubular())
        .filter_map(|c| raw.remove(c.name()).map(|m| (c, m)))
        .collect();
    let built: Vec<(StructureClass, Structure)> = tubular
        .into_par_iter()
        .map(|(c, mask)| {
            let graph = extract_branches(&skeletonize(&mask));
            (c, Structure { mask, graph: Some(graph) })
        })
        .collect();
    out.extend(built);
    Ok(out)
}

fn write_skeletons(out: &Path, patient_id: &str, class: StructureClass, s: &Structure) -> CliResult<()> {
    let Some(graph) = &s.graph else {
        return Ok(());
    };
    let dir = out.join(SKELETON_DIR);
    std::fs::create_dir_all(&dir).input_ctx(|| format!("creating {}", dir.display()))?;
    let stem = format!("{patient_id}.{class}");
    let skel = Mask::from_indices(graph.grid, graph.branches.iter().flat_map(|b| b.voxels.iter().copied()));
    let p = dir.join(format!("{stem}.mhd"));
    write_mask(&p, &skel).input_ctx(|| format!("writing {}", p.display()))?;
    let rows: Vec<BranchRow> = graph
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let (a, z) = (b.first(), b.last());
            BranchRow {
                branch_id: k,
                n_points: b.len(),
                length_mm: b.length_mm,
                end1_x_mm: a[0],
                end1_y_mm: a[1],
                end1_z_mm: a[2],
                end2_x_mm: z[0],
                end2_y_mm: z[1],
                end2_z_mm: z[2],
            }
        })
        .collect();
    write_csv(&dir.join(format!("{stem}.branches.csv")), &rows)
}

fn quantify_patient(cfg: &RunConfig, patient_id: &str, nodules: &[&ManifestRow]) -> CliResult<Vec<FeatureRow>> {
    let out = &cfg.output_dir;
    let t = cfg.resample_spacing_mm;
    let grid = reference_grid(cfg, patient_id)?;
    let masks: Vec<Mask> = nodules
        .par_iter()
        .map(|n| load_nodule(out, &n.nodule_id, &grid, t))
        .collect::<CliResult<_>>()?;
    let structs = structures(cfg, patient_id, &grid, &masks)?;
    if cfg.write_skeletons {
        for (&c, s) in &structs {
            write_skeletons(out, patient_id, c, s)?;
        }
    }
    let distances: BTreeMap<StructureClass, StructureDistance<'_>> = structs
        .iter()
        .map(|(&c, s)| Ok((c, StructureDistance::new(&s.mask)?)))
        .collect::<CliResult<_>>()?;

    let per_nodule: Vec<Vec<FeatureRow>> = nodules
        .par_iter()
        .zip(&masks)
        .map(|(n, mask)| {
            let voi = make_voi_with_floor(n.centroid(), n.eq_diameter_mm, cfg.voi_min_radius_mm)
                .input_ctx(|| format!("VOI of nodule {}", n.nodule_id))?;
            let ctx = NoduleContext::new(mask, voi, &cfg.filter).input_ctx(|| format!("nodule {}", n.nodule_id))?;
            StructureClass::ALL
                .into_iter()
                .map(|class| {
                    let Some(s) = structs.get(&class) else {
                        return Ok(FeatureRow::unavailable(&n.nodule_id, patient_id, class));
                    };
                    let d = distances[&class].distance_to(mask)?;
                    let f = ctx
                        .features(&n.nodule_id, class, &s.mask, s.graph.as_ref(), d, &cfg.filter)
                        .input_ctx(|| format!("nodule {} {class}", n.nodule_id))?;
                    Ok(FeatureRow::new(patient_id, f))
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<_>>()?;
    Ok(per_nodule.into_iter().flatten().collect())
}

/// Feature rows for every manifest nodule and class, in manifest order.
pub fn run(cfg: &RunConfig) -> CliResult<Vec<FeatureRow>> {
    let manifest: Vec<ManifestRow> = read_csv(&cfg.output_dir.join(MANIFEST))?;
    if manifest.is_empty() {
        return Err(CliError::input("manifest has no nodules"));
    }
    let mut by_patient: BTreeMap<&str, Vec<&ManifestRow>> = BTreeMap::new();
    for r in &manifest {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::input(format!("worker pool: {e}")))?;
    let mut rows: BTreeMap<String, Vec<FeatureRow>> = BTreeMap::new();
    pool.install(|| -> CliResult<()> {
        for (pid, nodules) in &by_patient {
            for r in quantify_patient(cfg, pid, nodules)? {
                rows.entry(r.nodule_id.clone()).or_default().push(r);
            }
        }
        Ok(())
    })?;
    let ordered: Vec<FeatureRow> = manifest
        .iter()
        .flat_map(|m| rows.remove(&m.nodule_id).unwrap_or_default())
        .collect();
    write_csv(&cfg.output_dir.join(FEATURES), &ordered)?;
    Ok(ordered)
}
