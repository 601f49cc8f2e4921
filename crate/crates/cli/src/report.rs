//! Plain-text summary of the analysis and evaluation reports.

use std::fmt::Write as _;

use serde_json::Value;

use crate::analyze::{AnalysisReport, REPORT};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InputContext};
use crate::learn::{Evaluation, EVALUATION};

pub const SUMMARY: &str = "report.md";

fn fmt_value(v: &Value, digits: usize) -> String {
    match v {
        Value::Number(n) => format!("{:.*}", digits, n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        _ => "-".into(),
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

fn significant(p: &Value) -> bool {
    p.as_f64().is_some_and(|p| p < 0.05)
}

pub fn render(analysis: Option<&AnalysisReport>, eval: Option<&Evaluation>) -> String {
    let mut s = String::new();
    if let Some(a) = analysis {
        let c = &a.cohort;
        let _ = writeln!(
            s,
            "# Analysis\n\n{} nodules from {} patients ({} benign, {} malignant); {} uncertain excluded.\n",
            c.nodules, c.patients, c.benign, c.malignant, c.uncertain_excluded
        );
        s.push_str("## Group comparisons (benign vs malignant)\n\n");
        s.push_str("| feature | benign | malignant | t | p |\n|---|---|---|---|---|\n");
        for g in &a.group_comparisons {
            let ms = |x: &Option<nodctx_core::stats::Summary>| {
                x.map_or_else(|| "-".into(), |x| format!("{:.2}±{:.2} (n={})", x.mean, x.sd, x.n))
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {}{} |",
                g.feature,
                ms(&g.benign),
                ms(&g.malignant),
                fmt_value(&g.t, 3),
                fmt_value(&g.p_value, 4),
                if significant(&g.p_value) { " *" } else { "" }
            );
        }
        s.push_str("\n## Dichotomized features\n\n");
        s.push_str("| feature | cutoff | attribute | cells | OR | chi2 | p |\n|---|---|---|---|---|---|---|\n");
        for e in &a.contingency {
            let t = &e.test;
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} {} / {} {} | {} | {} | {}{} |",
                e.feature,
                e.cutoff,
                e.attribute,
                t.cells[0][0],
                t.cells[0][1],
                t.cells[1][0],
                t.cells[1][1],
                fmt_value(&t.odds_ratio, 2),
                fmt_value(&t.chi_square, 2),
                fmt_value(&t.p_value, 4),
                if significant(&t.p_value) { " *" } else { "" }
            );
        }
        if !a.tables.is_empty() {
            s.push_str("\n## Supplied tables\n\n| table | cells | OR | chi2 | p |\n|---|---|---|---|---|\n");
            for e in &a.tables {
                let t = &e.test;
                let _ = writeln!(
                    s,
                    "| {} | {} {} / {} {} | {} | {} | {} |",
                    e.label,
                    t.cells[0][0],
                    t.cells[0][1],
                    t.cells[1][0],
                    t.cells[1][1],
                    fmt_value(&t.odds_ratio, 2),
                    fmt_value(&t.chi_square, 2),
                    fmt_value(&t.p_value, 4)
                );
            }
        }
        s.push('\n');
    }
    if let Some(e) = eval {
        let _ = writeln!(
            s,
            "# Patient-level evaluation\n\nThreshold {}, labels from {}.\n",
            e.threshold, e.label_source
        );
        s.push_str("| structure | choice | patients | accuracy | precision | recall | F1 | AUC |\n");
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for c in &e.classes {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | {} | {:.4} | {:.4} | {:.4} |",
                c.class,
                c.choice,
                c.patients,
                c.accuracy,
                fmt_opt(c.precision, 4),
                c.recall,
                c.f1,
                c.auc
            );
        }
    }
    s
}

pub fn run(cfg: &RunConfig) -> CliResult<String> {
    let out = &cfg.output_dir;
    let load = |name: &str| -> CliResult<Option<String>> {
        let p = out.join(name);
        if p.is_file() {
            Ok(Some(std::fs::read_to_string(&p).input_ctx(|| format!("reading {}", p.display()))?))
        } else {
            Ok(None)
        }
    };
    let analysis: Option<AnalysisReport> = load(REPORT)?
        .map(|t| serde_json::from_str(&t).input_ctx(|| format!("parsing {REPORT}")))
        .transpose()?;
    let eval: Option<Evaluation> = load(EVALUATION)?
        .map(|t| serde_json::from_str(&t).input_ctx(|| format!("parsing {EVALUATION}")))
        .transpose()?;
    if analysis.is_none() && eval.is_none() {
        return Err(CliError::input(format!(
            "neither {REPORT} nor {EVALUATION} found in {}",
            out.display()
        )));
    }
    let text = render(analysis.as_ref(), eval.as_ref());
    let p = out.join(SUMMARY);
    std::fs::write(&p, &text).input_ctx(|| format!("writing {}", p.display()))?;
    Ok(text)
}
