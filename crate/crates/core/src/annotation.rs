//! Reader annotations: XML parsing, contour rasterization, matching reads
//! across readers and fusing them into nodule records.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{dist, Grid, Mask, Point};

/// Reads whose centroids are this close belong to the same nodule.
pub const MATCH_RADIUS_MM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiMark {
    pub z_mm: f64,
    pub inclusion: bool,
    /// Boundary pixels `(x, y)` in slice index space.
    pub points: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Centroid-only mark of a nodule under 3 mm.
    SmallNodule,
    MissingMalignancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoduleMark {
    pub nodule_id: String,
    pub malignancy: Option<u8>,
    pub texture: Option<u8>,
    pub rois: Vec<RoiMark>,
    pub excluded: Option<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderSession {
    pub reader_id: String,
    pub nodules: Vec<NoduleMark>,
    pub non_nodules: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnnotation {
    pub patient_id: Option<String>,
    pub series_uid: Option<String>,
    pub sessions: Vec<ReaderSession>,
}

impl ParsedAnnotation {
    /// `(reader_id, mark)` for every mark that is not excluded.
    pub fn eligible(&self) -> impl Iterator<Item = (&str, &NoduleMark)> {
        self.sessions.iter().flat_map(|s| {
            s.nodules
                .iter()
                .filter(|n| n.excluded.is_none())
                .map(move |n| (s.reader_id.as_str(), n))
        })
    }

    /// Excluded nodule marks plus non-nodule marks.
    pub fn excluded_count(&self) -> usize {
        self.sessions
            .iter()
            .map(|s| s.non_nodules + s.nodules.iter().filter(|n| n.excluded.is_some()).count())
            .sum()
    }
}

fn children<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> Option<Node<'a, 'i>> {
    children(node, name).next()
}

fn child_text<'a>(node: Node<'a, '_>, name: &'static str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Xml(format!("cannot parse {what} from {s:?}")))
}

fn descendant_text<'a>(root: Node<'a, '_>, name: &str) -> Option<String> {
    root.descendants()
        .find(|n| n.is_element() && n.tag_name().name() == name)
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
}

fn parse_score(node: Node, name: &'static str) -> Result<Option<u8>> {
    let Some(text) = child(node, "characteristics").and_then(|c| child_text(c, name)) else {
        return Ok(None);
    };
    if text.is_empty() {
        return Ok(None);
    }
    let v: i64 = parse_num(text, name)?;
    if !(1..=5).contains(&v) {
        return Err(Error::ScoreOutOfRange(v));
    }
    Ok(Some(v as u8))
}

fn parse_roi(roi: Node) -> Result<RoiMark> {
    let z_mm = parse_num(
        child_text(roi, "imageZposition").ok_or_else(|| Error::Xml("roi without imageZposition".into()))?,
        "imageZposition",
    )?;
    let inclusion = child_text(roi, "inclusion").is_none_or(|t| !t.eq_ignore_ascii_case("false"));
    let points = children(roi, "edgeMap")
        .map(|e| {
            let x = child_text(e, "xCoord").ok_or_else(|| Error::Xml("edgeMap without xCoord".into()))?;
            let y = child_text(e, "yCoord").ok_or_else(|| Error::Xml("edgeMap without yCoord".into()))?;
            Ok([parse_num(x, "xCoord")?, parse_num(y, "yCoord")?])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoiMark {
        z_mm,
        inclusion,
        points,
    })
}

fn parse_nodule(node: Node) -> Result<NoduleMark> {
    let nodule_id = child_text(node, "noduleID").unwrap_or_default().to_string();
    let malignancy = parse_score(node, "malignancy")?;
    let texture = parse_score(node, "texture")?;
    let rois = children(node, "roi").map(parse_roi).collect::<Result<Vec<_>>>()?;
    let small = rois.iter().all(|r| r.points.len() <= 1);
    let excluded = if small {
        Some(Exclusion::SmallNodule)
    } else {
        if let Some(r) = rois.iter().find(|r| r.points.len() < 3) {
            return Err(Error::DegenerateRegion {
                z: r.z_mm,
                points: r.points.len(),
            });
        }
        malignancy.is_none().then_some(Exclusion::MissingMalignancy)
    };
    Ok(NoduleMark {
        nodule_id,
        malignancy,
        texture,
        rois,
        excluded,
    })
}

/// Parse one annotation document. Elements are matched by local name, so
/// the default namespace of the source files does not matter.
pub fn parse_annotation_xml(text: &str) -> Result<ParsedAnnotation> {
    let doc = Document::parse(text).map_err(|e| Error::Xml(e.to_string()))?;
    let root = doc.root_element();
    let sessions = root
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "readingSession")
        .enumerate()
        .map(|(k, s)| {
            let reader_id = child_text(s, "servicingRadiologistID")
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .unwrap_or_else(|| format!("session{k}"));
            let nodules = children(s, "unblindedReadNodule")
                .map(parse_nodule)
                .collect::<Result<Vec<_>>>()?;
            Ok(ReaderSession {
                reader_id,
                nodules,
                non_nodules: children(s, "nonNodule").count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedAnnotation {
        patient_id: descendant_text(root, "PatientID"),
        series_uid: descendant_text(root, "SeriesInstanceUid"),
        sessions,
    })
}

pub fn read_annotation_file(path: &Path) -> Result<ParsedAnnotation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotation_xml(&text)
}

/// Pixels of a closed boundary chain: the chain itself plus every pixel whose
/// center lies inside the polygon.
pub fn fill_polygon(points: &[[i64; 2]]) -> BTreeSet<[i64; 2]> {
    let mut out = BTreeSet::new();
    if points.is_empty() {
        return out;
    }
    let n = points.len();
    for k in 0..n {
        let (a, b) = (points[k], points[(k + 1) % n]);
        // Bresenham segment, so gaps in the chain are closed
        let (dx, dy) = ((b[0] - a[0]).abs(), -(b[1] - a[1]).abs());
        let (sx, sy) = ((b[0] - a[0]).signum(), (b[1] - a[1]).signum());
        let (mut x, mut y, mut err) = (a[0], a[1], dx + dy);
        loop {
            out.insert([x, y]);
            if x == b[0] && y == b[1] {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
    let (ymin, ymax) = points.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    for y in ymin..=ymax {
        let yc = y as f64;
        let mut xs: Vec<f64> = Vec::new();
        for k in 0..n {
            let (a, b) = (points[k], points[(k + 1) % n]);
            let (ay, by) = (a[1] as f64, b[1] as f64);
            if (ay <= yc) != (by <= yc) {
                xs.push(a[0] as f64 + (yc - ay) / (by - ay) * (b[0] - a[0]) as f64);
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            for x in pair[0].ceil() as i64..=pair[1].floor() as i64 {
                out.insert([x, y]);
            }
        }
    }
    out
}

type PixelSet = BTreeSet<[i64; 2]>;

/// Rasterize a mark onto `grid`. Exclusion contours are subtracted from the
/// inclusion contours of the same slice.
pub fn rasterize(mark: &NoduleMark, grid: &Grid) -> Result<Vec<usize>> {
    let mut slices: BTreeMap<usize, (PixelSet, PixelSet)> = BTreeMap::new();
    for roi in &mark.rois {
        let zf = ((roi.z_mm - grid.origin[2]) / grid.spacing.z).round();
        if !(0.0..grid.dims[2] as f64).contains(&zf) {
            return Err(Error::GridMismatch(format!(
                "contour at z = {} mm lies outside the scan",
                roi.z_mm
            )));
        }
        let entry = slices.entry(zf as usize).or_default();
        let filled = fill_polygon(&roi.points);
        if roi.inclusion {
            entry.0.extend(filled);
        } else {
            entry.1.extend(filled);
        }
    }
    let mut out = Vec::new();
    for (z, (inc, exc)) in slices {
        for p in inc.difference(&exc) {
            if let Some(i) = grid.checked_index(p[0], p[1], z as i64) {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiologistRead {
    pub reader_id: String,
    pub malignancy_score: u8,
    pub texture: Option<u8>,
    /// Sorted voxel indices of the filled region.
    pub voxels: Vec<usize>,
}

impl RadiologistRead {
    pub fn new(reader_id: impl Into<String>, malignancy_score: u8, texture: Option<u8>, mut voxels: Vec<usize>) -> Result<Self> {
        if !(1..=5).contains(&malignancy_score) {
            return Err(Error::ScoreOutOfRange(i64::from(malignancy_score)));
        }
        voxels.sort_unstable();
        voxels.dedup();
        Ok(RadiologistRead {
            reader_id: reader_id.into(),
            malignancy_score,
            texture,
            voxels,
        })
    }

    pub fn from_mark(reader_id: &str, mark: &NoduleMark, grid: &Grid) -> Result<Self> {
        let score = mark
            .malignancy
            .ok_or_else(|| Error::Xml(format!("nodule {} has no malignancy score", mark.nodule_id)))?;
        RadiologistRead::new(reader_id, score, mark.texture, rasterize(mark, grid)?)
    }

    pub fn centroid_mm(&self, grid: &Grid) -> Option<Point> {
        centroid(grid, &self.voxels)
    }
}

fn centroid(grid: &Grid, voxels: &[usize]) -> Option<Point> {
    if voxels.is_empty() {
        return None;
    }
    let mut s = [0.0; 3];
    for &i in voxels {
        let p = grid.index_center_mm(i);
        for a in 0..3 {
            s[a] += p[a];
        }
    }
    let n = voxels.len() as f64;
    Some([s[0] / n, s[1] / n, s[2] / n])
}

fn sorted_overlap(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition reads into physical nodules. Two reads match when their regions
/// share a voxel or their centroids are within [`MATCH_RADIUS_MM`]; clusters
/// are the transitive closure, listed by smallest member index.
pub fn group_reads(reads: &[RadiologistRead], grid: &Grid) -> Vec<Vec<usize>> {
    let centroids: Vec<Option<Point>> = reads.iter().map(|r| r.centroid_mm(grid)).collect();
    let mut parent: Vec<usize> = (0..reads.len()).collect();
    for a in 0..reads.len() {
        for b in a + 1..reads.len() {
            let near = matches!((centroids[a], centroids[b]), (Some(p), Some(q)) if dist(p, q) <= MATCH_RADIUS_MM);
            if near || sorted_overlap(&reads[a].voxels, &reads[b].voxels) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..reads.len() {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }
    clusters.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyLabel {
    Benign,
    Malignant,
    Uncertain,
}

impl ProxyLabel {
    /// Benign below a mean of 3, malignant above, uncertain at exactly 3.
    pub fn from_scores(scores: &[u8]) -> Option<ProxyLabel> {
        if scores.is_empty() {
            return None;
        }
        let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
        let mid = 3 * scores.len() as u64;
        Some(match sum.cmp(&mid) {
            std::cmp::Ordering::Less => ProxyLabel::Benign,
            std::cmp::Ordering::Greater => ProxyLabel::Malignant,
            std::cmp::Ordering::Equal => ProxyLabel::Uncertain,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ProxyLabel::Benign => "benign",
            ProxyLabel::Malignant => "malignant",
            ProxyLabel::Uncertain => "uncertain",
        }
    }

    pub fn is_malignant(self) -> Option<bool> {
        match self {
            ProxyLabel::Benign => Some(false),
            ProxyLabel::Malignant => Some(true),
            ProxyLabel::Uncertain => None,
        }
    }
}

impl fmt::Display for ProxyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProxyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" => Ok(ProxyLabel::Benign),
            "malignant" => Ok(ProxyLabel::Malignant),
            "uncertain" => Ok(ProxyLabel::Uncertain),
            other => Err(Error::Domain(format!("unknown proxy label {other:?}"))),
        }
    }
}

/// Mean absolute difference over unordered pairs; 0 with fewer than 2 scores.
pub fn pairwise_score_difference(scores: &[u8]) -> f64 {
    let n = scores.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            total += u64::from(scores[i].abs_diff(scores[j]));
        }
    }
    total as f64 / (n * (n - 1) / 2) as f64
}

/// Diameter of the sphere with the given volume.
pub fn equivalent_diameter(volume_mm3: f64) -> Result<f64> {
    if !(volume_mm3 > 0.0) || !volume_mm3.is_finite() {
        return Err(Error::InvalidVolume(volume_mm3));
    }
    Ok((6.0 * volume_mm3 / std::f64::consts::PI).cbrt())
}

/// Solid when the mean texture score reaches `solid_min`.
pub fn is_solid(mean_texture: f64, solid_min: f64) -> bool {
    mean_texture >= solid_min
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoduleRecord {
    pub nodule_id: String,
    pub patient_id: String,
    pub reads: Vec<RadiologistRead>,
    pub grid: Grid,
    /// Sorted voxel indices of the fused region.
    pub fused_voxels: Vec<usize>,
    pub centroid_mm: Point,
    pub eq_diameter_mm: f64,
    pub mean_score: f64,
    pub proxy_label: ProxyLabel,
    pub n_readers: usize,
    pub mean_pairwise_diff: f64,
    pub mean_texture: Option<f64>,
}

impl NoduleRecord {
    pub fn fused_mask(&self) -> Mask {
        Mask::from_indices(self.grid, self.fused_voxels.iter().copied())
    }

    pub fn scores(&self) -> Vec<u8> {
        self.reads.iter().map(|r| r.malignancy_score).collect()
    }
}

/// Fuse matched reads: keep voxels marked by at least half of the reads,
/// falling back to the union when that consensus is empty.
pub fn fuse_cluster(
    nodule_id: impl Into<String>,
    patient_id: impl Into<String>,
    reads: &[&RadiologistRead],
    grid: &Grid,
) -> Result<NoduleRecord> {
    if reads.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let mut sorted: Vec<RadiologistRead> = reads.iter().map(|&r| r.clone()).collect();
    sorted.sort_by(|a, b| {
        (a.reader_id.as_str(), a.malignancy_score, &a.voxels).cmp(&(b.reader_id.as_str(), b.malignancy_score, &b.voxels))
    });
    let n = sorted.len();
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &sorted {
        for &v in &r.voxels {
            *votes.entry(v).or_default() += 1;
        }
    }
    let mut fused: Vec<usize> = votes.iter().filter(|(_, &c)| 2 * c >= n).map(|(&v, _)| v).collect();
    if fused.is_empty() {
        fused = votes.keys().copied().collect();
    }
    let centroid_mm = centroid(grid, &fused).ok_or(Error::EmptyMask)?;
    let volume = fused.len() as f64 * grid.spacing.voxel_volume();
    let scores: Vec<u8> = sorted.iter().map(|r| r.malignancy_score).collect();
    let textures: Vec<f64> = sorted.iter().filter_map(|r| r.texture).map(f64::from).collect();
    let mean_texture = (!textures.is_empty()).then(|| textures.iter().sum::<f64>() / textures.len() as f64);
    Ok(NoduleRecord {
        nodule_id: nodule_id.into(),
        patient_id: patient_id.into(),
        grid: *grid,
        centroid_mm,
        eq_diameter_mm: equivalent_diameter(volume)?,
        mean_score: scores.iter().map(|&s| f64::from(s)).sum::<f64>() / n as f64,
        proxy_label: ProxyLabel::from_scores(&scores).expect("nonempty"),
        n_readers: sorted.iter().map(|r| r.reader_id.as_str()).collect::<HashSet<_>>().len(),
        mean_pairwise_diff: pairwise_score_difference(&scores),
        mean_texture,
        fused_voxels: fused,
        reads: sorted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosisCategory {
    Benign,
    PrimaryMalignant,
    Metastatic,
}

impl DiagnosisCategory {
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(DiagnosisCategory::Benign),
            2 => Ok(DiagnosisCategory::PrimaryMalignant),
            3 => Ok(DiagnosisCategory::Metastatic),
            c => Err(Error::Domain(format!("diagnosis category {c} outside 1..=3"))),
        }
    }

    pub fn is_malignant(self) -> bool {
        !matches!(self, DiagnosisCategory::Benign)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosisMethod {
    Unknown,
    Stability,
    Biopsy,
    Resection,
    Progression,
}

impl FromStr for DiagnosisMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "0" | "unknown" => Ok(DiagnosisMethod::Unknown),
            "1" | "stability" => Ok(DiagnosisMethod::Stability),
            "2" | "biopsy" => Ok(DiagnosisMethod::Biopsy),
            "3" | "resection" => Ok(DiagnosisMethod::Resection),
            "4" | "progression" => Ok(DiagnosisMethod::Progression),
            other => Err(Error::Domain(format!("unknown diagnosis method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientDiagnosis {
    pub patient_id: String,
    pub category: DiagnosisCategory,
    pub method: DiagnosisMethod,
}

impl PatientDiagnosis {
    pub fn is_malignant(&self) -> bool {
        self.category.is_malignant()
    }
}

#[derive(Deserialize)]
struct DiagnosisRow {
    patient_id: String,
    category: String,
    #[serde(default)]
    method: String,
}

/// Parse a `patient_id,category,method` CSV with a header row.
pub fn parse_diagnoses<R: std::io::Read>(reader: R) -> Result<Vec<PatientDiagnosis>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<DiagnosisRow>() {
        let row = row?;
        out.push(PatientDiagnosis {
            category: DiagnosisCategory::from_code(parse_num(&row.category, "category").map_err(|_| {
                Error::Domain(format!("bad diagnosis category {:?} for {}", row.category, row.patient_id))
            })?)?,
            method: row.method.parse()?,
            patient_id: row.patient_id,
        });
    }
    Ok(out)
}

pub fn read_diagnoses(path: &Path) -> Result<Vec<PatientDiagnosis>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_diagnoses(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(sessions: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<LidcReadMessage xmlns="http://www.nih.gov" uid="1">
  <ResponseHeader><SeriesInstanceUid>1.2.3</SeriesInstanceUid></ResponseHeader>
  {sessions}
</LidcReadMessage>"#
        )
    }

    fn square_roi(z: f64, x0: i64, y0: i64, r: i64) -> String {
        let mut edges = String::new();
        let pts = [[x0 - r, y0 - r], [x0 + r, y0 - r], [x0 + r, y0 + r], [x0 - r, y0 + r]];
        for p in pts {
            edges += &format!("<edgeMap><xCoord>{}</xCoord><yCoord>{}</yCoord></edgeMap>", p[0], p[1]);
        }
        format!("<roi><imageZposition>{z}</imageZposition><inclusion>TRUE</inclusion>{edges}</roi>")
    }

    fn session(reader: &str, body: &str) -> String {
        format!("<readingSession><servicingRadiologistID>{reader}</servicingRadiologistID>{body}</readingSession>")
    }

    fn nodule(id: &str, malignancy: i64, rois: &str) -> String {
        format!(
            "<unblindedReadNodule><noduleID>{id}</noduleID><characteristics><texture>5</texture>\
             <malignancy>{malignancy}</malignancy></characteristics>{rois}</unblindedReadNodule>"
        )
    }

    #[test]
    fn minimal_document() {
        let d = doc(&session("r1", &nodule("N1", 5, &square_roi(-10.0, 20, 20, 3))));
        let p = parse_annotation_xml(&d).unwrap();
        assert_eq!(p.series_uid.as_deref(), Some("1.2.3"));
        let eligible: Vec<_> = p.eligible().collect();
        assert_eq!(eligible.len(), 1);
        assert_eq!(eligible[0].0, "r1");
        assert_eq!(eligible[0].1.malignancy, Some(5));
        assert_eq!(eligible[0].1.texture, Some(5));
    }

    #[test]
    fn non_nodule_only() {
        let d = doc(&session(
            "r1",
            "<nonNodule><nonNoduleID>x</nonNoduleID><imageZposition>1</imageZposition>\
             <locus><xCoord>5</xCoord><yCoord>6</yCoord></locus></nonNodule>",
        ));
        let p = parse_annotation_xml(&d).unwrap();
        assert_eq!(p.eligible().count(), 0);
        assert_eq!(p.excluded_count(), 1);
    }

    #[test]
    fn small_nodule_flagged() {
        let roi = "<roi><imageZposition>0</imageZposition><inclusion>TRUE</inclusion>\
                   <edgeMap><xCoord>5</xCoord><yCoord>6</yCoord></edgeMap></roi>";
        let d = doc(&session("r1", &format!("<unblindedReadNodule><noduleID>s</noduleID>{roi}</unblindedReadNodule>")));
        let p = parse_annotation_xml(&d).unwrap();
        assert_eq!(p.sessions[0].nodules[0].excluded, Some(Exclusion::SmallNodule));
        assert_eq!(p.excluded_count(), 1);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_annotation_xml("<a><b></a>"), Err(Error::Xml(_))));
        let d = doc(&session("r1", &nodule("N1", 6, &square_roi(0.0, 5, 5, 2))));
        assert!(matches!(parse_annotation_xml(&d), Err(Error::ScoreOutOfRange(6))));
        let two = "<roi><imageZposition>2.5</imageZposition><inclusion>TRUE</inclusion>\
                   <edgeMap><xCoord>5</xCoord><yCoord>6</yCoord></edgeMap>\
                   <edgeMap><xCoord>6</xCoord><yCoord>6</yCoord></edgeMap></roi>";
        let rois = square_roi(0.0, 5, 5, 2) + two;
        let d = doc(&session("r1", &nodule("N1", 3, &rois)));
        assert!(matches!(
            parse_annotation_xml(&d),
            Err(Error::DegenerateRegion { points: 2, .. })
        ));
    }

    #[test]
    fn polygon_fill_includes_boundary() {
        let sq = fill_polygon(&[[0, 0], [4, 0], [4, 4], [0, 4]]);
        assert_eq!(sq.len(), 25);
        let tri = fill_polygon(&[[0, 0], [4, 0], [0, 4]]);
        for x in 0..=4 {
            for y in 0..=4 {
                assert_eq!(tri.contains(&[x, y]), x + y <= 4, "{x},{y}");
            }
        }
        // a sparse chain is closed by line segments
        assert_eq!(fill_polygon(&[[0, 0], [2, 0]]).len(), 3);
    }

    #[test]
    fn rasterize_with_exclusion() {
        let g = Grid::new([20, 20, 4], crate::volume::Spacing::new(1.0, 1.0, 2.0).unwrap(), [0.0, 0.0, -4.0]).unwrap();
        let mut mark = NoduleMark {
            nodule_id: "n".into(),
            malignancy: Some(4),
            texture: None,
            rois: vec![RoiMark {
                z_mm: -2.1,
                inclusion: true,
                points: vec![[2, 2], [10, 2], [10, 10], [2, 10]],
            }],
            excluded: None,
        };
        let v = rasterize(&mark, &g).unwrap();
        assert_eq!(v.len(), 81);
        assert!(v.iter().all(|&i| g.coords(i)[2] == 1));
        mark.rois.push(RoiMark {
            z_mm: -2.0,
            inclusion: false,
            points: vec![[5, 5], [7, 5], [7, 7], [5, 7]],
        });
        assert_eq!(rasterize(&mark, &g).unwrap().len(), 72);
        mark.rois[0].z_mm = 30.0;
        assert!(rasterize(&mark, &g).is_err());
    }

    fn cube_read(g: &Grid, reader: &str, score: u8, lo: [usize; 3], hi: [usize; 3]) -> RadiologistRead {
        let mut v = Vec::new();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    v.push(g.index(x, y, z));
                }
            }
        }
        RadiologistRead::new(reader, score, Some(4), v).unwrap()
    }

    #[test]
    fn grouping_cases() {
        let g = Grid::unit([60, 20, 20]).unwrap();
        let a = cube_read(&g, "a", 2, [2, 2, 2], [5, 5, 5]);
        let far = cube_read(&g, "b", 2, [40, 2, 2], [43, 5, 5]);
        assert_eq!(group_reads(&[a.clone(), far], &g).len(), 2);
        assert_eq!(group_reads(&[a.clone(), a.clone()], &g), vec![vec![0, 1]]);

        // chain: b overlaps a and c, a and c are disjoint and > 5 mm apart
        let b = cube_read(&g, "b", 3, [5, 2, 2], [12, 5, 5]);
        let c = cube_read(&g, "c", 4, [12, 2, 2], [16, 5, 5]);
        assert!(dist(a.centroid_mm(&g).unwrap(), c.centroid_mm(&g).unwrap()) > MATCH_RADIUS_MM);
        assert_eq!(group_reads(&[a, c, b], &g), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn grouping_by_centroid_only() {
        let g = Grid::unit([30, 30, 30]).unwrap();
        let a = cube_read(&g, "a", 2, [2, 2, 2], [4, 4, 4]);
        let b = cube_read(&g, "b", 2, [6, 2, 2], [8, 4, 4]);
        assert_eq!(group_reads(&[a, b], &g).len(), 1);
    }

    #[test]
    fn fusion_examples() {
        let g = Grid::unit([20, 20, 20]).unwrap();
        let r1 = cube_read(&g, "r1", 1, [2, 2, 2], [6, 6, 6]);
        let r2 = cube_read(&g, "r2", 2, [3, 3, 3], [7, 7, 7]);
        let r4 = cube_read(&g, "r3", 4, [4, 4, 4], [8, 8, 8]);
        let rec = fuse_cluster("n1", "p1", &[&r1, &r2, &r4], &g).unwrap();
        assert!((rec.mean_score - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(rec.proxy_label, ProxyLabel::Benign);
        assert_eq!(rec.mean_pairwise_diff, 2.0);
        assert_eq!(rec.n_readers, 3);

        let single = cube_read(&g, "r1", 3, [2, 2, 2], [4, 4, 4]);
        let rec = fuse_cluster("n2", "p1", &[&single], &g).unwrap();
        assert_eq!((rec.mean_score, rec.proxy_label, rec.mean_pairwise_diff), (3.0, ProxyLabel::Uncertain, 0.0));
        assert_eq!(rec.fused_voxels, single.voxels);

        let m = cube_read(&g, "a", 4, [2, 2, 2], [4, 4, 4]);
        let (m2, m3) = (RadiologistRead { reader_id: "b".into(), ..m.clone() }, RadiologistRead { reader_id: "c".into(), ..m.clone() });
        let rec = fuse_cluster("n3", "p1", &[&m, &m2, &m3], &g).unwrap();
        assert_eq!((rec.mean_score, rec.proxy_label), (4.0, ProxyLabel::Malignant));
        assert_eq!(rec.fused_voxels, m.voxels);
        assert!((rec.eq_diameter_mm - equivalent_diameter(27.0).unwrap()).abs() < 1e-12);
        assert_eq!(rec.centroid_mm, [3.0, 3.0, 3.0]);
        assert!(fuse_cluster("x", "p", &[], &g).is_err());
    }

    #[test]
    fn fusion_bounds_and_permutation() {
        let g = Grid::unit([20, 20, 20]).unwrap();
        let a = cube_read(&g, "a", 2, [2, 2, 2], [6, 6, 6]);
        let b = cube_read(&g, "b", 5, [4, 4, 4], [9, 9, 9]);
        let c = cube_read(&g, "c", 3, [5, 5, 5], [7, 7, 7]);
        let f1 = fuse_cluster("n", "p", &[&a, &b, &c], &g).unwrap();
        let f2 = fuse_cluster("n", "p", &[&c, &a, &b], &g).unwrap();
        assert_eq!(f1, f2);
        let fused: HashSet<usize> = f1.fused_voxels.iter().copied().collect();
        let union: HashSet<usize> = a.voxels.iter().chain(&b.voxels).chain(&c.voxels).copied().collect();
        assert!(fused.is_subset(&union));
        for v in &c.voxels {
            if a.voxels.contains(v) && b.voxels.contains(v) {
                assert!(fused.contains(v));
            }
        }
    }

    #[test]
    fn consensus_falls_back_to_union() {
        let g = Grid::unit([20, 20, 20]).unwrap();
        let a = cube_read(&g, "a", 2, [1, 1, 1], [2, 2, 2]);
        let b = cube_read(&g, "b", 2, [5, 5, 5], [6, 6, 6]);
        let c = cube_read(&g, "c", 2, [10, 10, 10], [11, 11, 11]);
        let f = fuse_cluster("n", "p", &[&a, &b, &c], &g).unwrap();
        assert_eq!(f.fused_voxels.len(), 24);
    }

    #[test]
    fn pairwise_differences() {
        assert_eq!(pairwise_score_difference(&[1, 2, 4]), 2.0);
        assert_eq!(pairwise_score_difference(&[3]), 0.0);
        assert_eq!(pairwise_score_difference(&[1, 5]), 4.0);
        assert_eq!(pairwise_score_difference(&[2, 2, 2, 2]), 0.0);
    }

    #[test]
    fn equivalent_diameters() {
        assert!((equivalent_diameter(523.599).unwrap() - 10.0).abs() < 1e-5);
        assert!((equivalent_diameter(std::f64::consts::PI / 6.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((equivalent_diameter(1.0).unwrap() - 1.2407).abs() < 1e-4);
        assert!(equivalent_diameter(0.0).is_err());
        assert!(equivalent_diameter(-1.0).is_err());
    }

    #[test]
    fn proxy_label_partition() {
        assert_eq!(ProxyLabel::from_scores(&[2, 3]), Some(ProxyLabel::Benign));
        assert_eq!(ProxyLabel::from_scores(&[2, 4]), Some(ProxyLabel::Uncertain));
        assert_eq!(ProxyLabel::from_scores(&[3, 4]), Some(ProxyLabel::Malignant));
        assert_eq!(ProxyLabel::from_scores(&[]), None);
        assert!(is_solid(4.0, 4.0) && !is_solid(3.9, 4.0));
    }

    #[test]
    fn three_readers_of_four_sessions() {
        let same = square_roi(0.0, 20, 20, 3);
        let shifted = square_roi(0.0, 21, 20, 3);
        let other = square_roi(0.0, 50, 50, 3);
        let d = doc(&[
            session("r1", &nodule("a", 4, &same)),
            session("r2", &nodule("b", 5, &shifted)),
            session("r3", &nodule("c", 3, &same)),
            session("r4", &nodule("d", 2, &other)),
        ]
        .concat());
        let p = parse_annotation_xml(&d).unwrap();
        let g = Grid::unit([64, 64, 1]).unwrap();
        let reads: Vec<RadiologistRead> = p
            .eligible()
            .map(|(r, m)| RadiologistRead::from_mark(r, m, &g).unwrap())
            .collect();
        let clusters = group_reads(&reads, &g);
        assert_eq!(clusters.len(), 2);
        let members: Vec<&RadiologistRead> = clusters[0].iter().map(|&i| &reads[i]).collect();
        let rec = fuse_cluster("n", "p", &members, &g).unwrap();
        assert_eq!(rec.n_readers, 3);
        assert_eq!(rec.proxy_label, ProxyLabel::Malignant);
    }

    #[test]
    fn diagnosis_csv() {
        let text = "patient_id,category,method\nLIDC-0001,1,stability\nLIDC-0002, 2 ,biopsy\nLIDC-0003,3,\n";
        let d = parse_diagnoses(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert!(!d[0].is_malignant() && d[1].is_malignant() && d[2].is_malignant());
        assert_eq!(d[2].method, DiagnosisMethod::Unknown);
        assert!(parse_diagnoses("patient_id,category,method\nx,4,biopsy\n".as_bytes()).is_err());
        assert!(parse_diagnoses("patient_id,category,method\nx,1,guess\n".as_bytes()).is_err());
    }
}
