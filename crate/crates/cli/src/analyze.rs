//! Statistical analysis of the feature table against nodule attributes.

use std::collections::BTreeMap;
use std::path::Path;

use nodctx_core::context::StructureClass;
use nodctx_core::stats::{
    chi_square_2x2, odds_ratio, odds_ratio_haldane, pearson_r, summarize, t_test_two_sample, ContingencyTable,
    Summary, TestResult,
};
use nodctx_core::{Error as CoreError, ProxyLabel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};
use crate::tables::{read_csv, FeatureRow, ManifestRow, FEATURES, MANIFEST};

pub const REPORT: &str = "analysis.json";

/// JSON number, with infinities spelled out.
pub fn real(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::Null
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// A labeled nodule with all of its feature rows.
#[derive(Debug, Clone)]
pub struct CohortNodule {
    pub manifest: ManifestRow,
    pub label: ProxyLabel,
    pub malignant: bool,
    pub features: BTreeMap<StructureClass, FeatureRow>,
}

/// Every manifest nodule joined with its feature rows, sorted by id.
pub fn load_nodules(out: &Path) -> CliResult<Vec<CohortNodule>> {
    let manifest: Vec<ManifestRow> = read_csv(&out.join(MANIFEST))?;
    let features: Vec<FeatureRow> = read_csv(&out.join(FEATURES))?;
    join(manifest, features)
}

/// The statistical cohort: uncertain nodules dropped, and their count.
pub fn load_cohort(out: &Path) -> CliResult<(Vec<CohortNodule>, usize)> {
    let all = load_nodules(out)?;
    let n = all.len();
    let cohort: Vec<CohortNodule> = all.into_iter().filter(|c| c.label != ProxyLabel::Uncertain).collect();
    let uncertain = n - cohort.len();
    Ok((cohort, uncertain))
}

pub fn join(manifest: Vec<ManifestRow>, features: Vec<FeatureRow>) -> CliResult<Vec<CohortNodule>> {
    let mut by_id: BTreeMap<String, BTreeMap<StructureClass, FeatureRow>> = BTreeMap::new();
    for f in features {
        let slot = by_id.entry(f.nodule_id.clone()).or_default();
        if slot.insert(f.class, f.clone()).is_some() {
            return Err(CliError::input(format!("duplicate {} row for nodule {}", f.class, f.nodule_id)));
        }
    }
    let mut all = Vec::new();
    for m in manifest {
        let label = m.label()?;
        let features = by_id.remove(&m.nodule_id).unwrap_or_default();
        all.push(CohortNodule {
            manifest: m,
            label,
            malignant: label == ProxyLabel::Malignant,
            features,
        });
    }
    all.sort_by(|a, b| a.manifest.nodule_id.cmp(&b.manifest.nodule_id));
    if let Some(w) = all.windows(2).find(|w| w[0].manifest.nodule_id == w[1].manifest.nodule_id) {
        return Err(CliError::input(format!("duplicate nodule {} in manifest", w[0].manifest.nodule_id)));
    }
    Ok(all)
}

/// A continuous per-nodule quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Distance(StructureClass),
    Count(StructureClass, u8),
    Volume(StructureClass, u8),
    EqDiameter,
    PairwiseDiff,
    MeanScore,
}

impl Quantity {
    pub fn name(self) -> String {
        match self {
            Quantity::Distance(c) => format!("{c}.distance_mm"),
            Quantity::Count(c, k) => format!("{c}.count_c{k}"),
            Quantity::Volume(c, k) => format!("{c}.nvol_c{k}_pct"),
            Quantity::EqDiameter => "eq_diameter_mm".into(),
            Quantity::PairwiseDiff => "mean_pairwise_diff".into(),
            Quantity::MeanScore => "mean_score".into(),
        }
    }

    pub fn value(self, n: &CohortNodule) -> Option<f64> {
        let f = |c: StructureClass| n.features.get(&c);
        match self {
            Quantity::Distance(c) => f(c)?.distance_mm,
            Quantity::Count(c, k) => f(c)?.count(k),
            Quantity::Volume(c, k) => f(c)?.nvol(k),
            Quantity::EqDiameter => Some(n.manifest.eq_diameter_mm),
            Quantity::PairwiseDiff => Some(n.manifest.mean_pairwise_diff),
            Quantity::MeanScore => Some(n.manifest.mean_score),
        }
    }

    pub fn choice(self) -> Option<u8> {
        match self {
            Quantity::Count(_, k) | Quantity::Volume(_, k) => Some(k),
            _ => None,
        }
    }
}

/// Structure features in table order.
pub fn structure_quantities() -> Vec<Quantity> {
    let mut q = Vec::new();
    for c in StructureClass::ALL {
        q.push(Quantity::Distance(c));
    }
    for c in StructureClass::ALL.into_iter().filter(|c| c.is_tubular()) {
        q.push(Quantity::Count(c, 1));
        q.push(Quantity::Count(c, 2));
    }
    for c in StructureClass::ALL.into_iter().filter(|c| c.is_tubular()) {
        q.push(Quantity::Volume(c, 1));
        q.push(Quantity::Volume(c, 2));
    }
    q
}

fn cutoff(cfg: &RunConfig, q: Quantity) -> Option<f64> {
    match q {
        Quantity::Distance(_) => Some(cfg.distance_cutoff_mm),
        Quantity::Count(c, 1) => cfg.cutoffs.get(&c).map(|x| x.count_c1),
        Quantity::Count(c, _) => cfg.cutoffs.get(&c).map(|x| x.count_c2),
        Quantity::Volume(c, _) => cfg.cutoffs.get(&c).map(|x| x.nvol_pct),
        _ => None,
    }
}

/// A binary nodule attribute; `Some(true)` is the second table column.
#[derive(Debug, Clone, Copy)]
enum Attribute {
    Malignancy,
    EqDiameter(f64),
    Texture(f64),
}

impl Attribute {
    fn name(self) -> &'static str {
        match self {
            Attribute::Malignancy => "malignancy",
            Attribute::EqDiameter(_) => "eq_diameter",
            Attribute::Texture(_) => "texture",
        }
    }

    fn columns(self) -> [String; 2] {
        match self {
            Attribute::Malignancy => ["benign".into(), "malignant".into()],
            Attribute::EqDiameter(d) => [format!("<{d} mm"), format!(">={d} mm")],
            Attribute::Texture(_) => ["solid".into(), "part-solid".into()],
        }
    }

    fn second(self, n: &CohortNodule) -> Option<bool> {
        match self {
            Attribute::Malignancy => Some(n.malignant),
            Attribute::EqDiameter(d) => Some(n.manifest.eq_diameter_mm >= d),
            Attribute::Texture(solid_min) => n.manifest.mean_texture.map(|t| t < solid_min),
        }
    }
}

/// OR and chi-square of one table, with degenerate cases reported in `note`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableTest {
    pub cells: [[u64; 2]; 2],
    pub odds_ratio: Value,
    pub chi_square: Value,
    pub p_value: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

pub fn test_table(t: &ContingencyTable, haldane: bool) -> TableTest {
    let mut notes = Vec::new();
    let or = if haldane { odds_ratio_haldane(t) } else { odds_ratio(t) };
    let or = match or {
        Ok(v) => {
            if v.is_infinite() {
                notes.push("odds ratio is infinite (zero cell)".to_string());
            }
            real(v)
        }
        Err(e) => {
            notes.push(e.to_string());
            Value::Null
        }
    };
    let (chi, p) = match chi_square_2x2(t) {
        Ok(r) => (real(r.statistic), real(r.p_value)),
        Err(e) => {
            if !notes.contains(&e.to_string()) {
                notes.push(e.to_string());
            }
            (Value::Null, Value::Null)
        }
    };
    TableTest {
        cells: t.cells(),
        odds_ratio: or,
        chi_square: chi,
        p_value: p,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContingencyEntry {
    pub feature: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub choice: Option<u8>,
    pub cutoff: f64,
    pub attribute: String,
    pub columns: [String; 2],
    #[serde(flatten)]
    pub test: TableTest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupComparison {
    pub feature: String,
    pub benign: Option<Summary>,
    pub malignant: Option<Summary>,
    pub t: Value,
    pub df: Option<f64>,
    pub p_value: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Correlation {
    pub features: Vec<String>,
    /// Pairwise-complete Pearson r; `null` where undefined.
    pub r: Vec<Vec<Option<f64>>>,
    pub p_value: Vec<Vec<Option<f64>>>,
    pub n: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortCounts {
    pub nodules: usize,
    pub patients: usize,
    pub benign: usize,
    pub malignant: usize,
    pub uncertain_excluded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassthroughEntry {
    pub label: String,
    #[serde(flatten)]
    pub test: TableTest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub cohort: CohortCounts,
    pub contingency: Vec<ContingencyEntry>,
    pub group_comparisons: Vec<GroupComparison>,
    pub correlation: Correlation,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub tables: Vec<PassthroughEntry>,
}

fn contingency(cfg: &RunConfig, cohort: &[CohortNodule]) -> Vec<ContingencyEntry> {
    let attributes = [
        Attribute::Malignancy,
        Attribute::EqDiameter(cfg.diameter_split_mm),
        Attribute::Texture(cfg.texture_solid_min),
    ];
    let mut out = Vec::new();
    for q in structure_quantities() {
        let Some(cut) = cutoff(cfg, q) else { continue };
        for a in attributes {
            let (values, groups): (Vec<f64>, Vec<bool>) =
                cohort.iter().filter_map(|n| Some((q.value(n)?, a.second(n)?))).unzip();
            if values.is_empty() {
                continue;
            }
            let t = ContingencyTable::from_values(&values, &groups, cut).expect("nonempty table");
            out.push(ContingencyEntry {
                feature: q.name(),
                choice: q.choice(),
                cutoff: cut,
                attribute: a.name().into(),
                columns: a.columns(),
                test: test_table(&t, cfg.haldane),
            });
        }
    }
    out
}

fn compare_groups(cfg: &RunConfig, cohort: &[CohortNodule], quantities: &[Quantity]) -> Vec<GroupComparison> {
    quantities
        .iter()
        .filter_map(|&q| {
            let mut b = Vec::new();
            let mut m = Vec::new();
            for n in cohort {
                if let Some(v) = q.value(n) {
                    if n.malignant { m.push(v) } else { b.push(v) }
                }
            }
            if b.is_empty() && m.is_empty() {
                return None;
            }
            let (t, df, p, note) = match t_test_two_sample(&b, &m, cfg.ttest) {
                Ok(TestResult { statistic, p_value, df, degenerate }) => (
                    real(statistic),
                    df,
                    real(p_value),
                    degenerate.then(|| "zero variance in both groups".to_string()),
                ),
                Err(e) => (Value::Null, None, Value::Null, Some(e.to_string())),
            };
            Some(GroupComparison {
                feature: q.name(),
                benign: summarize(&b),
                malignant: summarize(&m),
                t,
                df,
                p_value: p,
                note,
            })
        })
        .collect()
}

fn correlation(cohort: &[CohortNodule], quantities: &[Quantity]) -> Correlation {
    let k = quantities.len();
    let cols: Vec<Vec<Option<f64>>> = quantities
        .iter()
        .map(|&q| cohort.iter().map(|n| q.value(n)).collect())
        .collect();
    let mut r = vec![vec![None; k]; k];
    let mut p = vec![vec![None; k]; k];
    let mut counts = vec![vec![0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (x, y): (Vec<f64>, Vec<f64>) = cols[i]
                .iter()
                .zip(&cols[j])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            counts[i][j] = x.len();
            counts[j][i] = x.len();
            if let Ok(res) = pearson_r(&x, &y) {
                r[i][j] = Some(res.statistic);
                r[j][i] = Some(res.statistic);
                p[i][j] = Some(res.p_value);
                p[j][i] = Some(res.p_value);
            }
        }
    }
    Correlation {
        features: quantities.iter().map(|q| q.name()).collect(),
        r,
        p_value: p,
        n: counts,
    }
}

#[derive(Deserialize)]
struct TableRow {
    label: String,
    t11: u64,
    t12: u64,
    t21: u64,
    t22: u64,
}

/// Tables given directly as `label,t11,t12,t21,t22`.
pub fn passthrough(path: &Path, haldane: bool) -> CliResult<Vec<PassthroughEntry>> {
    let rows: Vec<TableRow> = read_csv(path)?;
    rows.into_iter()
        .map(|r| {
            let t = ContingencyTable::new(r.t11, r.t12, r.t21, r.t22)
                .input_ctx(|| format!("table {:?} in {}", r.label, path.display()))?;
            Ok(PassthroughEntry {
                label: r.label,
                test: test_table(&t, haldane),
            })
        })
        .collect()
}

pub fn analyze(cfg: &RunConfig, cohort: &[CohortNodule], uncertain: usize) -> CliResult<AnalysisReport> {
    let malignant = cohort.iter().filter(|n| n.malignant).count();
    if malignant == 0 || malignant == cohort.len() {
        return Err(CoreError::SingleClass.into());
    }
    let mut quantities = structure_quantities();
    quantities.extend([Quantity::EqDiameter, Quantity::PairwiseDiff]);
    let mut with_score = quantities.clone();
    with_score.push(Quantity::MeanScore);
    let patients: std::collections::BTreeSet<&str> = cohort.iter().map(|n| n.manifest.patient_id.as_str()).collect();
    Ok(AnalysisReport {
        cohort: CohortCounts {
            nodules: cohort.len(),
            patients: patients.len(),
            benign: cohort.len() - malignant,
            malignant,
            uncertain_excluded: uncertain,
        },
        contingency: contingency(cfg, cohort),
        group_comparisons: compare_groups(cfg, cohort, &quantities),
        correlation: correlation(cohort, &with_score),
        tables: match &cfg.tables_csv {
            Some(p) => passthrough(p, cfg.haldane)?,
            None => Vec::new(),
        },
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<AnalysisReport> {
    let (cohort, uncertain) = load_cohort(&cfg.output_dir)?;
    let report = analyze(cfg, &cohort, uncertain)?;
    let p = cfg.output_dir.join(REPORT);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&p, text + "\n").input_ctx(|| format!("writing {}", p.display()))?;
    Ok(report)
}
