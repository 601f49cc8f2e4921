//! 2×2 contingency analysis of dichotomized features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::chi2_sf;
use crate::stats::TestResult;

/// Counts `(v <= cutoff, v > cutoff)`.
pub fn dichotomize(values: &[f64], cutoff: f64) -> (usize, usize) {
    let low = values.iter().filter(|&&v| v <= cutoff).count();
    (low, values.len() - low)
}

/// Rows: feature `<= cutoff` / `> cutoff`. Columns: first / second group of
/// the nodule attribute (benign / malignant, small / large, solid / part-solid).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub t11: u64,
    pub t12: u64,
    pub t21: u64,
    pub t22: u64,
}

impl ContingencyTable {
    pub fn new(t11: u64, t12: u64, t21: u64, t22: u64) -> Result<Self> {
        let t = ContingencyTable { t11, t12, t21, t22 };
        if t.total() == 0 {
            return Err(Error::DegenerateTable("table is empty"));
        }
        Ok(t)
    }

    /// Cross-tabulate feature values against a two-group attribute.
    pub fn from_values(values: &[f64], in_second_group: &[bool], cutoff: f64) -> Result<Self> {
        if values.len() != in_second_group.len() {
            return Err(Error::Domain("values and groups differ in length".into()));
        }
        let mut t = [0u64; 4];
        for (&v, &g) in values.iter().zip(in_second_group) {
            let row = usize::from(v > cutoff);
            t[2 * row + usize::from(g)] += 1;
        }
        ContingencyTable::new(t[0], t[1], t[2], t[3])
    }

    pub fn total(&self) -> u64 {
        self.t11 + self.t12 + self.t21 + self.t22
    }

    pub fn rows(&self) -> [u64; 2] {
        [self.t11 + self.t12, self.t21 + self.t22]
    }

    pub fn cols(&self) -> [u64; 2] {
        [self.t11 + self.t21, self.t12 + self.t22]
    }

    pub fn transpose(&self) -> Self {
        ContingencyTable {
            t11: self.t11,
            t12: self.t21,
            t21: self.t12,
            t22: self.t22,
        }
    }

    pub fn swap_columns(&self) -> Self {
        ContingencyTable {
            t11: self.t12,
            t12: self.t11,
            t21: self.t22,
            t22: self.t21,
        }
    }

    pub fn swap_rows(&self) -> Self {
        ContingencyTable {
            t11: self.t21,
            t12: self.t22,
            t21: self.t11,
            t22: self.t12,
        }
    }

    pub fn cells(&self) -> [[u64; 2]; 2] {
        [[self.t11, self.t12], [self.t21, self.t22]]
    }
}

/// Odds ratio `(t11 t22) / (t12 t21)`; `+inf` when only the denominator is zero.
pub fn odds_ratio(t: &ContingencyTable) -> Result<f64> {
    if t.rows().contains(&0) || t.cols().contains(&0) {
        return Err(Error::DegenerateTable("a row or column is empty"));
    }
    let num = t.t11 as f64 * t.t22 as f64;
    let den = t.t12 as f64 * t.t21 as f64;
    match (num == 0.0, den == 0.0) {
        (true, true) => Err(Error::DegenerateTable("both cross products are zero")),
        (false, true) => Ok(f64::INFINITY),
        _ => Ok(num / den),
    }
}

/// Odds ratio with 0.5 added to every cell when any cell is zero.
pub fn odds_ratio_haldane(t: &ContingencyTable) -> Result<f64> {
    if [t.t11, t.t12, t.t21, t.t22].contains(&0) {
        let c = |v: u64| v as f64 + 0.5;
        Ok(c(t.t11) * c(t.t22) / (c(t.t12) * c(t.t21)))
    } else {
        odds_ratio(t)
    }
}

/// Pearson chi-square with one degree of freedom, no continuity correction.
pub fn chi_square_2x2(t: &ContingencyTable) -> Result<TestResult> {
    let rows = t.rows();
    let cols = t.cols();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(Error::DegenerateTable("a row or column marginal is zero"));
    }
    let n = t.total() as f64;
    let obs = t.cells();
    let mut stat = 0.0;
    for (r, row) in obs.iter().enumerate() {
        for (c, &o) in row.iter().enumerate() {
            let e = rows[r] as f64 * cols[c] as f64 / n;
            let d = o as f64 - e;
            stat += d * d / e;
        }
    }
    Ok(TestResult {
        statistic: stat,
        p_value: chi2_sf(stat, 1.0)?,
        df: Some(1.0),
        degenerate: false,
    })
}
