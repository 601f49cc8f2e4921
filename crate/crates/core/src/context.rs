//! Per-nodule features of the surrounding pleura, airways and vessels.
//!
//! The distance feature is measured over the whole scan. Counting number and
//! normalized volume are restricted to the nodule's spherical VOI, either for
//! every branch inside it (choice 1) or only for branches that are attached
//! to, near, or projecting towards the nodule (choice 2).

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{connected_components, edt, Branch, Connectivity, DistanceField, SkeletonGraph};
use crate::volume::{dist2, Grid, Mask, Point, SphereVoi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureClass {
    Pleura,
    Airway,
    Vessel,
    Artery,
    Vein,
}

impl StructureClass {
    pub const ALL: [StructureClass; 5] = [
        StructureClass::Pleura,
        StructureClass::Airway,
        StructureClass::Vessel,
        StructureClass::Artery,
        StructureClass::Vein,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructureClass::Pleura => "pleura",
            StructureClass::Airway => "airway",
            StructureClass::Vessel => "vessel",
            StructureClass::Artery => "artery",
            StructureClass::Vein => "vein",
        }
    }

    /// Pleura only has the distance feature.
    pub fn is_tubular(self) -> bool {
        self != StructureClass::Pleura
    }
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StructureClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown structure class {s:?}")))
    }
}

/// Choice-2 filtering thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    /// Whether direct attachment (condition i) qualifies a branch.
    pub attach: bool,
    pub d_near: f64,
    pub d_far: f64,
    pub max_angle_deg: f64,
}

impl Default for FilterRule {
    fn default() -> Self {
        FilterRule {
            attach: true,
            d_near: 3.0,
            d_far: 5.0,
            max_angle_deg: 15.0,
        }
    }
}

impl FilterRule {
    pub fn new(attach: bool, d_near: f64, d_far: f64, max_angle_deg: f64) -> Result<Self> {
        if !(d_near >= 0.0 && d_near < d_far) {
            return Err(Error::Domain(format!(
                "filter distances must satisfy 0 <= d_near < d_far, got {d_near} and {d_far}"
            )));
        }
        if !(max_angle_deg > 0.0 && max_angle_deg < 90.0) {
            return Err(Error::Domain(format!(
                "filter angle must be in (0, 90) degrees, got {max_angle_deg}"
            )));
        }
        Ok(FilterRule {
            attach,
            d_near,
            d_far,
            max_angle_deg,
        })
    }

    pub fn reach(&self) -> f64 {
        self.d_near.max(self.d_far)
    }
}

/// Which filter condition a branch matched first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// i: centerline inside or touching the nodule
    Attached,
    /// ii: centerline within `d_near` of the nodule surface
    Near,
    /// iii: within `d_far` and projecting towards the centroid
    Projecting,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionHistogram {
    pub attached: usize,
    pub near: usize,
    pub projecting: usize,
}

impl ConditionHistogram {
    fn record(&mut self, c: Condition) {
        match c {
            Condition::Attached => self.attached += 1,
            Condition::Near => self.near += 1,
            Condition::Projecting => self.projecting += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantification {
    pub count: usize,
    pub nvol_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredQuantification {
    pub count: usize,
    pub nvol_pct: f64,
    pub conditions: ConditionHistogram,
}

/// One row of the feature table. Absent values are `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFeatures {
    pub nodule_id: String,
    pub class: StructureClass,
    pub distance_mm: Option<f64>,
    pub count_c1: Option<usize>,
    pub count_c2: Option<usize>,
    pub nvol_c1_pct: Option<f64>,
    pub nvol_c2_pct: Option<f64>,
    pub conditions: Option<ConditionHistogram>,
}

/// Angle in degrees between the branch trajectory at the end nearer the
/// centroid and the segment from that end to the centroid. The trajectory
/// runs from the `min(5, len - 1)`-th point before the end to the end.
pub fn projection_angle(branch: &Branch, centroid: Point) -> Option<f64> {
    let n = branch.len();
    if n < 2 {
        return None;
    }
    let k = 5.min(n - 1);
    let (end, is_last) = branch.end_nearer(centroid);
    let back = if is_last {
        branch.polyline[n - 1 - k]
    } else {
        branch.polyline[k]
    };
    let t = unit([end[0] - back[0], end[1] - back[1], end[2] - back[2]])?;
    let Some(u) = unit([centroid[0] - end[0], centroid[1] - end[1], centroid[2] - end[2]]) else {
        return Some(0.0);
    };
    let c = (t[0] * u[0] + t[1] * u[1] + t[2] * u[2]).clamp(-1.0, 1.0);
    Some(c.acos().to_degrees())
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 0.0).then(|| v.map(|c| c / n))
}

fn touches(mask: &Mask, p: Point) -> bool {
    let c = mask.grid().continuous_index(p).map(|v| v.round() as i64);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if mask.get_signed(c[0] + dx, c[1] + dy, c[2] + dz) {
                    return true;
                }
            }
        }
    }
    false
}

/// Filter conditions checked in order i, ii, iii; the first match is returned.
/// `nodule_field` is the nodule's distance field; points outside it count as
/// farther than any threshold.
pub fn branch_passes_filter(
    branch: &Branch,
    nodule: &Mask,
    centroid: Point,
    rule: &FilterRule,
    nodule_field: &DistanceField,
) -> Option<Condition> {
    if branch.is_empty() {
        return None;
    }
    if rule.attach && branch.polyline.iter().any(|&p| touches(nodule, p)) {
        return Some(Condition::Attached);
    }
    let min_d = branch
        .polyline
        .iter()
        .filter_map(|&p| nodule_field.sample_mm(p))
        .fold(f64::INFINITY, f64::min);
    if min_d <= rule.d_near {
        return Some(Condition::Near);
    }
    if min_d <= rule.d_far {
        if let Some(angle) = projection_angle(branch, centroid) {
            if angle <= rule.max_angle_deg {
                return Some(Condition::Projecting);
            }
        }
    }
    None
}

/// Distance field of `nodule` over its bounding box grown by `margin_mm`.
pub fn local_distance_field(nodule: &Mask, margin_mm: f64) -> Result<DistanceField> {
    let (lo, hi) = nodule.bounding_box().ok_or(Error::EmptyMask)?;
    let g = nodule.grid();
    let s = g.spacing.as_array();
    let mut a = [0usize; 3];
    let mut b = [0usize; 3];
    for ax in 0..3 {
        let pad = (margin_mm / s[ax]).ceil() as usize + 1;
        a[ax] = lo[ax].saturating_sub(pad);
        b[ax] = (hi[ax] + pad).min(g.dims[ax] - 1);
    }
    edt(&nodule.crop(a, b))
}

/// Distance from the nodule to the nearest voxel of `structure`, in mm: zero
/// when they overlap or are 26-adjacent, otherwise the smallest center-to-center
/// distance. `None` when either mask is empty.
pub fn surface_distance(nodule: &Mask, structure: &Mask) -> Result<Option<f64>> {
    nodule.grid().ensure_compatible(structure.grid())?;
    if nodule.is_empty() || structure.is_empty() {
        return Ok(None);
    }
    let field = edt(nodule)?;
    let g = *nodule.grid();
    let mut best = f64::INFINITY;
    for i in structure.indices() {
        if touches(nodule, g.index_center_mm(i)) {
            return Ok(Some(0.0));
        }
        best = best.min(field.data()[i]);
    }
    Ok(Some(best))
}

/// Precomputed distance-to-structure field, shared by all nodules of a scan.
pub struct StructureDistance<'a> {
    structure: &'a Mask,
    field: Option<DistanceField>,
}

impl<'a> StructureDistance<'a> {
    pub fn new(structure: &'a Mask) -> Result<Self> {
        let field = if structure.is_empty() {
            None
        } else {
            Some(edt(structure)?)
        };
        Ok(StructureDistance { structure, field })
    }

    /// Same value as [`surface_distance`], computed from the structure side.
    pub fn distance_to(&self, nodule: &Mask) -> Result<Option<f64>> {
        self.structure.grid().ensure_compatible(nodule.grid())?;
        let Some(field) = &self.field else {
            return Ok(None);
        };
        if nodule.is_empty() {
            return Ok(None);
        }
        let g = *nodule.grid();
        let mut best = f64::INFINITY;
        for i in nodule.indices() {
            if touches(self.structure, g.index_center_mm(i)) {
                return Ok(Some(0.0));
            }
            best = best.min(field.data()[i]);
        }
        Ok(Some(best))
    }
}

/// Boundary of the lung field: voxels of `lung ∪ nodules` with a face
/// neighbor outside it (or outside the grid).
pub fn pleural_surface(lung: &Mask, nodules: &[&Mask]) -> Result<Mask> {
    let mut field = lung.clone();
    for n in nodules {
        field = field.union(n)?;
    }
    let g = *field.grid();
    let faces = Connectivity::Face6.offsets();
    let mut surface = Mask::empty(g);
    for i in field.indices() {
        let c = g.coords(i);
        let boundary = faces.iter().any(|d| {
            !field.get_signed(c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2])
        });
        if boundary {
            surface.data_mut()[i] = true;
        }
    }
    Ok(surface)
}

/// Nodule-centric geometry reused across structure classes.
pub struct NoduleContext<'a> {
    nodule: &'a Mask,
    voi: SphereVoi,
    /// VOI voxels outside the nodule, ascending.
    background: Vec<usize>,
    field: DistanceField,
    margin_mm: f64,
}

impl<'a> NoduleContext<'a> {
    pub fn new(nodule: &'a Mask, voi: SphereVoi, rule: &FilterRule) -> Result<Self> {
        if nodule.is_empty() {
            return Err(Error::EmptyMask);
        }
        let voxels = voi.voxel_indices(nodule.grid());
        if voxels.is_empty() {
            return Err(Error::VoiOutsideGrid);
        }
        let background: Vec<usize> = voxels.into_iter().filter(|&i| !nodule.data()[i]).collect();
        if background.is_empty() {
            return Err(Error::VoiFilledByNodule);
        }
        let margin_mm = rule.reach();
        let field = local_distance_field(nodule, margin_mm)?;
        Ok(NoduleContext {
            nodule,
            voi,
            background,
            field,
            margin_mm,
        })
    }

    pub fn voi(&self) -> &SphereVoi {
        &self.voi
    }

    pub fn grid(&self) -> &Grid {
        self.nodule.grid()
    }

    /// Size of the VOI minus the nodule, in voxels.
    pub fn background_len(&self) -> usize {
        self.background.len()
    }

    fn branch_in_voi(&self, b: &Branch) -> bool {
        b.polyline.iter().any(|&p| self.voi.contains(p))
    }

    fn structure_in_voi(&self, structure: &Mask) -> Vec<usize> {
        self.background
            .iter()
            .copied()
            .filter(|&i| structure.data()[i])
            .collect()
    }

    fn pct(&self, n: usize) -> f64 {
        100.0 * n as f64 / self.background.len() as f64
    }

    pub fn choice1(&self, structure: &Mask, graph: &SkeletonGraph) -> Result<Quantification> {
        self.grid().ensure_compatible(structure.grid())?;
        let count = graph.branches.iter().filter(|b| self.branch_in_voi(b)).count();
        let inside = self.structure_in_voi(structure).len();
        Ok(Quantification {
            count,
            nvol_pct: self.pct(inside),
        })
    }

    fn field_for(&self, rule: &FilterRule) -> Result<Cow<'_, DistanceField>> {
        if rule.reach() <= self.margin_mm {
            Ok(Cow::Borrowed(&self.field))
        } else {
            Ok(Cow::Owned(local_distance_field(self.nodule, rule.reach())?))
        }
    }

    /// Filter verdict for every branch, `None` for branches outside the VOI.
    pub fn classify(&self, graph: &SkeletonGraph, rule: &FilterRule) -> Result<Vec<Option<Condition>>> {
        let field = self.field_for(rule)?;
        Ok(graph
            .branches
            .iter()
            .map(|b| {
                if self.branch_in_voi(b) {
                    branch_passes_filter(b, self.nodule, self.voi.center, rule, &field)
                } else {
                    None
                }
            })
            .collect())
    }

    /// Choice-2 counting number and normalized volume. Structure voxels in the
    /// VOI are grouped into 26-connected components; each voxel is claimed by
    /// the nearest branch among those running through its component (or among
    /// all VOI branches if none does) and counts only if that branch passes.
    pub fn choice2(
        &self,
        structure: &Mask,
        graph: &SkeletonGraph,
        rule: &FilterRule,
    ) -> Result<FilteredQuantification> {
        self.grid().ensure_compatible(structure.grid())?;
        let verdicts = self.classify(graph, rule)?;
        let candidates: Vec<usize> = (0..graph.branches.len())
            .filter(|&k| self.branch_in_voi(&graph.branches[k]))
            .collect();
        let mut conditions = ConditionHistogram::default();
        for c in verdicts.iter().flatten() {
            conditions.record(*c);
        }
        let count = verdicts.iter().filter(|v| v.is_some()).count();
        let passes = |k: usize| verdicts[k].is_some();

        let inside = self.structure_in_voi(structure);
        let claimed = if inside.is_empty() || count == 0 {
            0
        } else if count == candidates.len() {
            inside.len()
        } else {
            self.claimed_voxels(&inside, graph, &candidates, &passes)
        };
        Ok(FilteredQuantification {
            count,
            nvol_pct: self.pct(claimed),
            conditions,
        })
    }

    fn claimed_voxels(
        &self,
        inside: &[usize],
        graph: &SkeletonGraph,
        candidates: &[usize],
        passes: &dyn Fn(usize) -> bool,
    ) -> usize {
        let g = *self.grid();
        let (lo, hi) = self.voi.voxel_box(&g).expect("VOI intersects grid");
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let local = Grid {
            dims,
            spacing: g.spacing,
            origin: g.center_mm(lo),
        };
        let to_local = |i: usize| {
            let c = g.coords(i);
            local.index(c[0] - lo[0], c[1] - lo[1], c[2] - lo[2])
        };
        let mut sub = Mask::empty(local);
        for &i in inside {
            sub.data_mut()[to_local(i)] = true;
        }
        let labels = connected_components(&sub, Connectivity::Vertex26);

        // branches running through each component
        let mut through: Vec<Vec<usize>> = vec![Vec::new(); labels.count];
        for &k in candidates {
            for &p in &graph.branches[k].polyline {
                if !self.voi.contains(p) {
                    continue;
                }
                if let Some(j) = local.nearest_voxel(p) {
                    let l = labels.labels[j];
                    if l > 0 && !through[l as usize - 1].contains(&k) {
                        through[l as usize - 1].push(k);
                    }
                }
            }
        }

        let mut claimed = 0usize;
        for (ci, members) in labels.components().into_iter().enumerate() {
            let pool: &[usize] = if through[ci].is_empty() {
                candidates
            } else {
                &through[ci]
            };
            let n_pass = pool.iter().filter(|&&k| passes(k)).count();
            if n_pass == 0 {
                continue;
            }
            if n_pass == pool.len() {
                claimed += members.len();
                continue;
            }
            for j in members {
                let p = local.index_center_mm(j);
                let mut best = (f64::INFINITY, usize::MAX);
                for &k in pool {
                    for &q in &graph.branches[k].polyline {
                        let d = dist2(p, q);
                        if d < best.0 || (d == best.0 && k < best.1) {
                            best = (d, k);
                        }
                    }
                }
                if passes(best.1) {
                    claimed += 1;
                }
            }
        }
        claimed
    }

    /// Full feature row for one structure class.
    pub fn features(
        &self,
        nodule_id: &str,
        class: StructureClass,
        structure: &Mask,
        graph: Option<&SkeletonGraph>,
        distance_mm: Option<f64>,
        rule: &FilterRule,
    ) -> Result<StructureFeatures> {
        let mut row = StructureFeatures {
            nodule_id: nodule_id.to_string(),
            class,
            distance_mm,
            count_c1: None,
            count_c2: None,
            nvol_c1_pct: None,
            nvol_c2_pct: None,
            conditions: None,
        };
        if class.is_tubular() {
            let empty;
            let graph = match graph {
                Some(g) => g,
                None => {
                    empty = SkeletonGraph {
                        grid: *structure.grid(),
                        nodes: Vec::new(),
                        branches: Vec::new(),
                    };
                    &empty
                }
            };
            let c1 = self.choice1(structure, graph)?;
            let c2 = self.choice2(structure, graph, rule)?;
            row.count_c1 = Some(c1.count);
            row.nvol_c1_pct = Some(c1.nvol_pct);
            row.count_c2 = Some(c2.count);
            row.nvol_c2_pct = Some(c2.nvol_pct);
            row.conditions = Some(c2.conditions);
        }
        Ok(row)
    }
}

pub fn quantify_choice1(
    nodule: &Mask,
    structure: &Mask,
    graph: &SkeletonGraph,
    voi: &SphereVoi,
) -> Result<Quantification> {
    NoduleContext::new(nodule, *voi, &FilterRule::default())?.choice1(structure, graph)
}

pub fn quantify_choice2(
    nodule: &Mask,
    structure: &Mask,
    graph: &SkeletonGraph,
    voi: &SphereVoi,
    rule: &FilterRule,
) -> Result<FilteredQuantification> {
    NoduleContext::new(nodule, *voi, rule)?.choice2(structure, graph, rule)
}
