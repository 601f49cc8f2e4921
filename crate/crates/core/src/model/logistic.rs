//! L2-penalized logistic regression fitted by damped Newton iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Penalty on the standardized weights; the bias is not penalized.
    pub l2: f64,
    /// Loss multiplier for positive examples.
    pub positive_weight: f64,
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            l2: 1e-4,
            positive_weight: 1.0,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Replacement for a missing value of each feature.
    pub impute: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn population_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
}

/// Missing-value fill per column: observed maximum plus one SD.
fn impute_values(rows: &[Vec<Option<f64>>], d: usize) -> Result<Vec<f64>> {
    (0..d)
        .map(|j| {
            let seen: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            if seen.is_empty() {
                return Err(Error::InsufficientData(format!("feature {j} has no observed values")));
            }
            let max = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(max + population_sd(&seen))
        })
        .collect()
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    c: Vec<f64>,
    c_sum: f64,
    l2: f64,
}

impl Problem<'_> {
    fn margin(&self, w: &[f64], b: f64, row: &[f64]) -> f64 {
        b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>()
    }

    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let mut loss = 0.0;
        for ((row, &y), c) in self.x.iter().zip(self.y).zip(&self.c) {
            let z = self.margin(w, b, row);
            loss += c * if y { softplus(-z) } else { softplus(z) };
        }
        loss / self.c_sum + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Gradient and Hessian over `(w, b)`, bias last.
    fn derivatives(&self, w: &[f64], b: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = w.len();
        let mut g = vec![0.0; d + 1];
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        for ((row, &y), c) in self.x.iter().zip(self.y).zip(&self.c) {
            let p = sigmoid(self.margin(w, b, row));
            let r = c * (p - f64::from(u8::from(y)));
            let s = c * p * (1.0 - p);
            for i in 0..=d {
                let xi = if i < d { row[i] } else { 1.0 };
                g[i] += r * xi;
                for k in 0..=i {
                    let xk = if k < d { row[k] } else { 1.0 };
                    h[i][k] += s * xi * xk;
                }
            }
        }
        for i in 0..=d {
            g[i] /= self.c_sum;
            for k in 0..=i {
                h[i][k] /= self.c_sum;
                h[k][i] = h[i][k];
            }
        }
        for i in 0..d {
            g[i] += self.l2 * w[i];
            h[i][i] += self.l2;
        }
        (g, h)
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

impl LogisticModel {
    /// Fit on rows of possibly-missing feature values.
    pub fn fit(
        feature_names: &[String],
        rows: &[Vec<Option<f64>>],
        labels: &[bool],
        opts: &FitOptions,
    ) -> Result<LogisticModel> {
        let d = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::Domain(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::ArityMismatch {
                expected: d,
                actual: r.len(),
            });
        }
        let pos = labels.iter().filter(|&&y| y).count();
        if pos == 0 || pos == labels.len() {
            return Err(Error::SingleClass);
        }
        if pos < 2 || labels.len() - pos < 2 {
            return Err(Error::InsufficientData("need at least 2 examples per class".into()));
        }
        if !(opts.l2 >= 0.0) || !(opts.positive_weight > 0.0) {
            return Err(Error::Domain("l2 must be >= 0 and positive_weight > 0".into()));
        }

        let impute = impute_values(rows, d)?;
        let filled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&impute).map(|(v, f)| v.unwrap_or(*f)).collect())
            .collect();
        let mut means = vec![0.0; d];
        let mut sds = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = filled.iter().map(|r| r[j]).collect();
            means[j] = col.iter().sum::<f64>() / col.len() as f64;
            sds[j] = population_sd(&col);
            if !(sds[j] > 1e-12 * means[j].abs().max(1.0)) {
                return Err(Error::ConstantFeature(j));
            }
        }
        let x: Vec<Vec<f64>> = filled
            .iter()
            .map(|r| (0..d).map(|j| (r[j] - means[j]) / sds[j]).collect())
            .collect();

        let c: Vec<f64> = labels
            .iter()
            .map(|&y| if y { opts.positive_weight } else { 1.0 })
            .collect();
        let c_sum = c.iter().sum();
        let prob = Problem {
            x: &x,
            y: labels,
            c,
            c_sum,
            l2: opts.l2,
        };

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut f = prob.objective(&w, b);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iter {
            let (g, h) = prob.derivatives(&w, b);
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let step = solve(h, g.iter().map(|v| -v).collect())
                .filter(|s| s.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() < 0.0)
                .unwrap_or_else(|| g.iter().map(|v| -v).collect());
            let slope: f64 = step.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let nw: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let nb = b + t * step[d];
                let nf = prob.objective(&nw, nb);
                if nf <= f + 1e-4 * t * slope {
                    w = nw;
                    b = nb;
                    f = nf;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // no further decrease representable in floating point
                break;
            }
        }
        if !converged {
            let (g, _) = prob.derivatives(&w, b);
            converged = g.iter().all(|v| v.abs() < opts.tol);
        }
        if !converged {
            log::warn!("logistic fit stopped after {iterations} iterations without converging");
        }

        Ok(LogisticModel {
            feature_names: feature_names.to_vec(),
            weights: w,
            bias: b,
            means,
            sds,
            impute,
            iterations,
            converged,
        })
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// Linear score `w · standardize(x) + b`.
    pub fn decision(&self, x: &[Option<f64>]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                actual: x.len(),
            });
        }
        let mut z = self.bias;
        for (j, v) in x.iter().enumerate() {
            let v = v.unwrap_or(self.impute[j]);
            z += self.weights[j] * (v - self.means[j]) / self.sds[j];
        }
        Ok(z)
    }

    pub fn predict_proba(&self, x: &[Option<f64>]) -> Result<f64> {
        Ok(sigmoid(self.decision(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    fn col(v: &[f64]) -> Vec<Vec<Option<f64>>> {
        v.iter().map(|&x| vec![Some(x)]).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let mut x = vec![-1.0; 50];
        x.extend(vec![1.0; 50]);
        let y: Vec<bool> = (0..100).map(|i| i >= 50).collect();
        let m = LogisticModel::fit(&names(1), &col(&x), &y, &FitOptions::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(v, &l)| (m.predict_proba(&[Some(**v)]).unwrap() >= 0.5) == l)
            .count();
        assert!(correct as f64 / 100.0 >= 0.99);
    }

    #[test]
    fn independent_feature_has_small_weight() {
        // each feature value appears once with each label
        let mut x = Vec::new();
        let mut y = Vec::new();
        for v in 0..40 {
            x.extend([v as f64, v as f64]);
            y.extend([false, true]);
        }
        let m = LogisticModel::fit(&names(1), &col(&x), &y, &FitOptions::default()).unwrap();
        assert!(m.weights[0].abs() < 0.1);
        assert!(m.converged);
    }

    #[test]
    fn duplicated_rows_same_probabilities() {
        let x = [0.1, 0.5, 0.9, 1.3, 0.2, 2.0, 1.1, 0.7];
        let y = [false, true, false, true, false, true, true, false];
        let a = LogisticModel::fit(&names(1), &col(&x), &y, &FitOptions::default()).unwrap();
        let x2: Vec<f64> = x.iter().chain(&x).copied().collect();
        let y2: Vec<bool> = y.iter().chain(&y).copied().collect();
        let b = LogisticModel::fit(&names(1), &col(&x2), &y2, &FitOptions::default()).unwrap();
        for v in x {
            let (pa, pb) = (a.predict_proba(&[Some(v)]).unwrap(), b.predict_proba(&[Some(v)]).unwrap());
            assert!((pa - pb).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_contracts() {
        let m = LogisticModel {
            feature_names: names(2),
            weights: vec![0.0, 0.0],
            bias: 0.0,
            means: vec![0.0, 0.0],
            sds: vec![1.0, 1.0],
            impute: vec![0.0, 0.0],
            iterations: 0,
            converged: true,
        };
        assert_eq!(m.predict_proba(&[Some(3.0), Some(-7.0)]).unwrap(), 0.5);
        assert!(matches!(
            m.predict_proba(&[Some(1.0)]),
            Err(Error::ArityMismatch { expected: 2, actual: 1 })
        ));
        let m = LogisticModel {
            weights: vec![2.0, 0.0],
            bias: -2.0,
            ..m
        };
        assert_eq!(m.predict_proba(&[Some(1.0), None]).unwrap(), 0.5);
        assert!(m.predict_proba(&[Some(1.5), None]).unwrap() > m.predict_proba(&[Some(1.0), None]).unwrap());
    }

    #[test]
    fn fit_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            LogisticModel::fit(&names(1), &col(&x), &[true; 4], &FitOptions::default()),
            Err(Error::SingleClass)
        ));
        let rows: Vec<Vec<Option<f64>>> = x.iter().map(|&v| vec![Some(v), Some(5.0)]).collect();
        assert!(matches!(
            LogisticModel::fit(&names(2), &rows, &[false, true, false, true], &FitOptions::default()),
            Err(Error::ConstantFeature(1))
        ));
    }

    #[test]
    fn missing_values_imputed_beyond_max() {
        let rows = vec![vec![Some(1.0)], vec![Some(3.0)], vec![None], vec![Some(2.0)], vec![None]];
        let m = LogisticModel::fit(&names(1), &rows, &[true, false, false, true, false], &FitOptions::default())
            .unwrap();
        let sd = population_sd(&[1.0, 3.0, 2.0]);
        assert!((m.impute[0] - (3.0 + sd)).abs() < 1e-15);
    }

    #[test]
    fn affine_rescaling_invariance() {
        let x = [0.3, 1.2, 0.8, 2.5, 1.9, 0.1, 3.0, 1.4, 2.2, 0.6];
        let y = [false, false, true, true, false, false, true, true, true, false];
        let a = LogisticModel::fit(&names(1), &col(&x), &y, &FitOptions::default()).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| 37.5 * v - 4.0).collect();
        let b = LogisticModel::fit(&names(1), &col(&xs), &y, &FitOptions::default()).unwrap();
        for (u, v) in x.iter().zip(&xs) {
            let d = a.predict_proba(&[Some(*u)]).unwrap() - b.predict_proba(&[Some(*v)]).unwrap();
            assert!(d.abs() < 1e-6);
        }
    }

    #[test]
    fn stable_sigmoid() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }
}
