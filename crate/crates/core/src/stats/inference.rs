//! Two-sample t-tests, Pearson correlation and descriptive summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::student_t_two_tailed;
use crate::stats::TestResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    #[default]
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for n < 2.
    pub sd: f64,
}

pub fn summarize(x: &[f64]) -> Option<Summary> {
    if x.is_empty() {
        return None;
    }
    let n = x.len();
    let mean = mean(x);
    let sd = if n > 1 {
        (sum_sq_dev(x, mean) / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary { n, mean, sd })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sum_sq_dev(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Two-sample t-test with a two-tailed p-value.
///
/// When both samples have zero variance the statistic is 0 with p = 1 if the
/// means agree, and ±inf with p = 0 otherwise; both cases set `degenerate`.
pub fn t_test_two_sample(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sum_sq_dev(a, ma) / (na - 1.0), sum_sq_dev(b, mb) / (nb - 1.0));
    let diff = ma - mb;

    let (se2, df) = match variant {
        TTestVariant::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (sp2 * (1.0 / na + 1.0 / nb), df)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = if se2 > 0.0 {
                se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (se2, df)
        }
    };

    if se2 == 0.0 {
        let (statistic, p_value) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TestResult {
            statistic,
            p_value,
            df: Some(df),
            degenerate: true,
        });
    }
    let t = diff / se2.sqrt();
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_tailed(t, df)?,
        df: Some(df),
        degenerate: false,
    })
}

/// Pearson correlation with a two-tailed p-value from `t = r sqrt((n-2)/(1-r²))`.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "pearson_r needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "pearson_r needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = sum_sq_dev(x, mx);
    let syy = sum_sq_dev(y, my);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain("pearson_r is undefined for a constant input".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        student_t_two_tailed(r * (df / (1.0 - r * r)).sqrt(), df)?
    };
    Ok(TestResult {
        statistic: r,
        p_value,
        df: Some(df),
        degenerate: false,
    })
}
