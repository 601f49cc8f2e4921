//! Malignancy classifiers, patient-level aggregation and ROC analysis.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub mod logistic;
pub mod roc;

pub use logistic::{sigmoid, FitOptions, LogisticModel};
pub use roc::{metrics_from_confusion, roc_curve, threshold_metrics, Confusion, RocCurve, RocPoint, ThresholdMetrics};

/// Patient probability as the maximum over its nodule probabilities, so a
/// patient is benign only if every nodule is.
pub fn patient_aggregate(nodule_probs: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    nodule_probs
        .iter()
        .map(|(pid, probs)| {
            if probs.is_empty() {
                return Err(Error::InsufficientData(format!("patient {pid} has no nodules")));
            }
            Ok((pid.clone(), probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        })
        .collect()
}

/// Group `(patient_id, value)` pairs by patient.
pub fn group_by_patient<I, S, T>(pairs: I) -> BTreeMap<String, Vec<T>>
where
    I: IntoIterator<Item = (S, T)>,
    S: Into<String>,
{
    let mut out: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for (p, v) in pairs {
        out.entry(p.into()).or_default().push(v);
    }
    out
}

/// Patient label under the same rule: malignant if any nodule is.
pub fn patient_labels(nodule_labels: &BTreeMap<String, Vec<bool>>) -> BTreeMap<String, bool> {
    nodule_labels
        .iter()
        .map(|(p, l)| (p.clone(), l.iter().any(|&v| v)))
        .collect()
}
