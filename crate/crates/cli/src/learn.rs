//! Per-structure malignancy models: training on nodules, evaluation on
//! patients.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nodctx_core::annotation::read_diagnoses;
use nodctx_core::context::StructureClass;
use nodctx_core::model::{patient_aggregate, roc_curve, threshold_metrics, Confusion, FitOptions};
use nodctx_core::{LogisticModel, ProxyLabel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyze::{load_cohort, load_nodules, real, CohortNodule};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};
use crate::tables::{read_id_list, write_csv};

pub const MODEL_DIR: &str = "models";
pub const EVALUATION: &str = "evaluation.json";
pub const PREDICTIONS: &str = "predictions.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureModel {
    pub class: StructureClass,
    pub choice: u8,
    pub model: LogisticModel,
    pub train_patients: Vec<String>,
    pub train_nodules: usize,
}

/// Feature names of a class under a filter choice.
pub fn feature_names(class: StructureClass, choice: u8) -> Vec<String> {
    if class.is_tubular() {
        vec!["distance_mm".into(), format!("count_c{choice}"), format!("nvol_c{choice}_pct")]
    } else {
        vec!["distance_mm".into()]
    }
}

pub fn feature_vector(n: &CohortNodule, class: StructureClass, choice: u8) -> Vec<Option<f64>> {
    let row = n.features.get(&class);
    let d = row.and_then(|r| r.distance_mm);
    if class.is_tubular() {
        vec![d, row.and_then(|r| r.count(choice)), row.and_then(|r| r.nvol(choice))]
    } else {
        vec![d]
    }
}

pub fn model_path(out: &Path, class: StructureClass) -> PathBuf {
    out.join(MODEL_DIR).join(format!("{class}.json"))
}

fn id_set(p: &Path) -> CliResult<BTreeSet<String>> {
    Ok(read_id_list(p)?.into_iter().collect())
}

fn ensure_disjoint(train: &BTreeSet<String>, test: &BTreeSet<String>) -> CliResult<()> {
    let shared: Vec<&String> = train.intersection(test).collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{} patient(s) in both the training and test sets: {}",
            shared.len(),
            shared.iter().take(10).map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )))
    }
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        l2: cfg.model.l2,
        positive_weight: cfg.model.positive_weight,
        max_iter: cfg.model.max_iter,
        ..FitOptions::default()
    }
}

/// Fit one model per structure class that has any observed training data.
pub fn train(cfg: &RunConfig) -> CliResult<Vec<StructureModel>> {
    let train_ids = id_set(cfg.require(&cfg.train_list, "train_list")?)?;
    if let Some(t) = &cfg.test_list {
        ensure_disjoint(&train_ids, &id_set(t)?)?;
    }
    let (cohort, _) = load_cohort(&cfg.output_dir)?;
    let nodules: Vec<&CohortNodule> = cohort
        .iter()
        .filter(|n| train_ids.contains(&n.manifest.patient_id))
        .collect();
    if nodules.is_empty() {
        return Err(CliError::validation("no labeled nodules belong to the training patients"));
    }
    let patients: Vec<String> = nodules
        .iter()
        .map(|n| n.manifest.patient_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<bool> = nodules.iter().map(|n| n.malignant).collect();
    let choice = cfg.model.choice;
    let opts = fit_options(cfg);

    let fitted: Vec<Option<StructureModel>> = StructureClass::ALL
        .into_par_iter()
        .map(|class| {
            let rows: Vec<Vec<Option<f64>>> = nodules.iter().map(|n| feature_vector(n, class, choice)).collect();
            if rows.iter().all(|r| r.iter().all(Option::is_none)) {
                log::warn!("no {class} features for the training patients, skipping");
                return Ok(None);
            }
            let model = LogisticModel::fit(&feature_names(class, choice), &rows, &labels, &opts)
                .map_err(|e| CliError::validation(format!("{class} model: {e}")))?;
            if !model.converged {
                log::warn!("{class} model stopped after {} iterations", model.iterations);
            }
            Ok(Some(StructureModel {
                class,
                choice,
                model,
                train_patients: patients.clone(),
                train_nodules: nodules.len(),
            }))
        })
        .collect::<CliResult<_>>()?;
    let models: Vec<StructureModel> = fitted.into_iter().flatten().collect();
    if models.is_empty() {
        return Err(CliError::validation("no structure class has training features"));
    }
    let dir = cfg.output_dir.join(MODEL_DIR);
    std::fs::create_dir_all(&dir).input_ctx(|| format!("creating {}", dir.display()))?;
    for m in &models {
        let p = model_path(&cfg.output_dir, m.class);
        let text = serde_json::to_string_pretty(m).expect("model serializes");
        std::fs::write(&p, text + "\n").input_ctx(|| format!("writing {}", p.display()))?;
    }
    Ok(models)
}

pub fn load_models(out: &Path) -> CliResult<Vec<StructureModel>> {
    let mut models = Vec::new();
    for class in StructureClass::ALL {
        let p = model_path(out, class);
        if !p.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&p).input_ctx(|| format!("reading {}", p.display()))?;
        let m: StructureModel = serde_json::from_str(&text).input_ctx(|| format!("parsing {}", p.display()))?;
        models.push(m);
    }
    if models.is_empty() {
        return Err(CliError::input(format!("no models in {}", out.join(MODEL_DIR).display())));
    }
    Ok(models)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassEvaluation {
    pub class: StructureClass,
    pub choice: u8,
    pub patients: usize,
    pub nodules: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub threshold: f64,
    /// `diagnosis` or `proxy` (any nodule malignant).
    pub label_source: String,
    pub classes: Vec<ClassEvaluation>,
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    patient_id: &'a str,
    class: StructureClass,
    probability: f64,
    malignant: bool,
}

#[derive(Serialize)]
struct RocRow {
    fpr: f64,
    tpr: f64,
    threshold: String,
}

/// Patient ground truth: the diagnosis list when configured, otherwise
/// malignant if any labeled nodule is.
fn patient_truth(cfg: &RunConfig, nodules: &[&CohortNodule]) -> CliResult<(BTreeMap<String, bool>, &'static str)> {
    if let Some(p) = &cfg.diagnosis_csv {
        let d = read_diagnoses(p).input_ctx(|| format!("reading {}", p.display()))?;
        return Ok((d.into_iter().map(|d| (d.patient_id.clone(), d.is_malignant())).collect(), "diagnosis"));
    }
    let mut truth = BTreeMap::new();
    for n in nodules.iter().filter(|n| n.label != ProxyLabel::Uncertain) {
        *truth.entry(n.manifest.patient_id.clone()).or_insert(false) |= n.malignant;
    }
    Ok((truth, "proxy"))
}

/// Score every test nodule, take the per-patient maximum and compare with
/// patient truth.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Evaluation> {
    let test_ids = id_set(cfg.require(&cfg.test_list, "test_list")?)?;
    if let Some(t) = &cfg.train_list {
        ensure_disjoint(&id_set(t)?, &test_ids)?;
    }
    let models = load_models(&cfg.output_dir)?;
    for m in &models {
        ensure_disjoint(&m.train_patients.iter().cloned().collect(), &test_ids)?;
    }
    let all = load_nodules(&cfg.output_dir)?;
    let nodules: Vec<&CohortNodule> = all.iter().filter(|n| test_ids.contains(&n.manifest.patient_id)).collect();
    if nodules.is_empty() {
        return Err(CliError::validation("no nodules belong to the test patients"));
    }
    let (truth, source) = patient_truth(cfg, &nodules)?;
    let threshold = cfg.model.threshold;

    let mut classes = Vec::new();
    let mut predictions = Vec::new();
    let roc_dir = &cfg.output_dir;
    for m in &models {
        let mut probs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut used = 0;
        for n in &nodules {
            if !truth.contains_key(&n.manifest.patient_id) {
                continue;
            }
            let p = m.model.predict_proba(&feature_vector(n, m.class, m.choice))?;
            probs.entry(n.manifest.patient_id.clone()).or_default().push(p);
            used += 1;
        }
        let agg = patient_aggregate(&probs)?;
        let scores: Vec<f64> = agg.values().copied().collect();
        let labels: Vec<bool> = agg.keys().map(|p| truth[p]).collect();
        let roc = roc_curve(&scores, &labels).map_err(|e| CliError::validation(format!("{} test set: {e}", m.class)))?;
        let t = threshold_metrics(&scores, &labels, threshold)?;
        let roc_rows: Vec<RocRow> = roc
            .points
            .iter()
            .map(|p| RocRow {
                fpr: p.fpr,
                tpr: p.tpr,
                threshold: real(p.threshold).to_string().trim_matches('"').to_string(),
            })
            .collect();
        write_csv(&roc_dir.join(format!("roc_{}.csv", m.class)), &roc_rows)?;
        for ((pid, &p), &l) in agg.iter().zip(&labels) {
            predictions.push((pid.clone(), m.class, p, l));
        }
        classes.push(ClassEvaluation {
            class: m.class,
            choice: m.choice,
            patients: agg.len(),
            nodules: used,
            accuracy: t.accuracy,
            precision: t.precision,
            recall: t.recall,
            f1: t.f1,
            auc: roc.auc,
            confusion: t.confusion,
        });
    }
    let rows: Vec<PredictionRow> = predictions
        .iter()
        .map(|(pid, c, p, l)| PredictionRow {
            patient_id: pid,
            class: *c,
            probability: *p,
            malignant: *l,
        })
        .collect();
    write_csv(&cfg.output_dir.join(PREDICTIONS), &rows)?;
    let eval = Evaluation {
        threshold,
        label_source: source.into(),
        classes,
    };
    let p = cfg.output_dir.join(EVALUATION);
    let text = serde_json::to_string_pretty(&eval).expect("evaluation serializes");
    std::fs::write(&p, text + "\n").input_ctx(|| format!("writing {}", p.display()))?;
    Ok(eval)
}
