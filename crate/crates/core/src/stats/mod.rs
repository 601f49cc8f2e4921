//! Hypothesis tests and the special functions behind their p-values.

use serde::{Deserialize, Serialize};

pub mod contingency;
pub mod inference;
pub mod special;

pub use contingency::{chi_square_2x2, dichotomize, odds_ratio, odds_ratio_haldane, ContingencyTable};
pub use inference::{pearson_r, summarize, t_test_two_sample, Summary, TTestVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<f64>,
    /// Set when a zero-variance convention produced the result.
    pub degenerate: bool,
}
