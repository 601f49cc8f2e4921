//! Batch pipeline: `ingest` → `quantify` → `analyze`, `train` → `evaluate`,
//! and `report`. Every stage reads and writes files in the configured
//! output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod config;
pub mod error;
pub mod ingest;
pub mod learn;
pub mod quantify;
pub mod report;
pub mod scan;
pub mod tables;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Quantify,
    Analyze,
    Train,
    Evaluate,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Quantify => "quantify",
            Command::Analyze => "analyze",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Report => "report",
        }
    }
}

/// Run one command, echoing the configuration first. Returns a one-line
/// summary for the terminal.
pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<String> {
    cfg.echo(cmd.name())?;
    match cmd {
        Command::Ingest => {
            let s = ingest::run(cfg)?;
            Ok(format!(
                "{} nodules from {} patients: {} benign, {} malignant, {} uncertain ({} marks excluded, {} empty reads)",
                s.nodules(),
                s.patients,
                s.benign,
                s.malignant,
                s.uncertain,
                s.excluded_marks,
                s.empty_reads
            ))
        }
        Command::Quantify => {
            let rows = quantify::run(cfg)?;
            Ok(format!("{} feature rows written to {}", rows.len(), cfg.output_dir.join(tables::FEATURES).display()))
        }
        Command::Analyze => {
            let r = analyze::run(cfg)?;
            Ok(format!(
                "{} nodules analyzed: {} contingency tables, {} group comparisons",
                r.cohort.nodules,
                r.contingency.len(),
                r.group_comparisons.len()
            ))
        }
        Command::Train => {
            let models = learn::train(cfg)?;
            let names: Vec<&str> = models.iter().map(|m| m.class.name()).collect();
            Ok(format!("trained {} models: {}", models.len(), names.join(", ")))
        }
        Command::Evaluate => {
            let e = learn::evaluate(cfg)?;
            let parts: Vec<String> = e
                .classes
                .iter()
                .map(|c| format!("{} AUC {:.4} acc {:.4}", c.class, c.auc, c.accuracy))
                .collect();
            Ok(parts.join("; "))
        }
        Command::Report => {
            report::run(cfg)?;
            Ok(format!("wrote {}", cfg.output_dir.join(report::SUMMARY).display()))
        }
    }
}
