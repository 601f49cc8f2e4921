use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nodctx_cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "nodctx", version, about = "Nodule context quantification and malignancy analysis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set filter.d_near_mm=2.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Parse annotations and write the nodule manifest and fused masks.
    Ingest,
    /// Compute structure features for every nodule.
    Quantify,
    /// Group statistics, contingency tests and correlations.
    Analyze,
    /// Fit one logistic model per structure class.
    Train,
    /// Patient-level evaluation of the trained models.
    Evaluate,
    /// Render analysis and evaluation results as Markdown.
    Report,
    /// Print the effective configuration.
    Config,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nodctx: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cmd = match cli.command {
        Cmd::Ingest => Command::Ingest,
        Cmd::Quantify => Command::Quantify,
        Cmd::Analyze => Command::Analyze,
        Cmd::Train => Command::Train,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Report => Command::Report,
        Cmd::Config => {
            print!("{}", cfg.render());
            return ExitCode::SUCCESS;
        }
    };
    match run(cmd, &cfg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nodctx {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
