//! The `netsentry` binary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netsentry_core::error::{Error, ErrorClass};
use netsentry_cli::commands::{self, RunContext};

#[derive(Parser)]
#[command(
    name = "netsentry",
    version,
    about = "Continual anomaly detection for network flows: train, pseudo-label, detect shifts, explain them, and adapt"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Bypasses shift gating for explain and lifecycle adaptation.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the model on a labeled window and fit the labeler.
    Train,
    /// Pseudo-label a CSV of arrivals.
    Label,
    /// Run the shift permutation test between two windows.
    Detect,
    /// Select the sample subset explaining a detected shift.
    Explain,
    /// Fine-tune on the explanation-selected samples.
    Adapt,
    /// Score a checkpoint against a labeled test set.
    Eval,
    /// Run the full train/detect/explain/adapt loop over windows.
    Lifecycle,
    /// Generate synthetic drifting windows from the configured scenario.
    Simulate,
}

fn run(cli: Cli) -> Result<(), Error> {
    let config_path = cli.config.ok_or_else(|| {
        Error::InvalidConfig("a configuration file is required; pass --config PATH".into())
    })?;
    let ctx = RunContext::new(&config_path, cli.seed, cli.out, cli.force)?;

    match cli.command {
        Command::Train => {
            let outcome = commands::run_train(&ctx)?;
            println!("checkpoint: {}", outcome.checkpoint.display());
            println!(
                "final epoch loss: {:.6}",
                outcome.report.loss_trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Label => {
            let outcome = commands::run_label(&ctx)?;
            println!("labeled {} rows: {}", outcome.rows, outcome.labeled_csv.display());
        }
        Command::Detect => {
            let outcome = commands::run_detect(&ctx)?;
            println!(
                "shifted: {} (kl = {:.6}, p = {:.6})",
                outcome.report.shifted, outcome.report.kl_statistic, outcome.report.p_value
            );
            println!("report: {}", outcome.report_path.display());
        }
        Command::Explain => {
            let outcome = commands::run_explain(&ctx)?;
            println!(
                "selected {} old + {} new samples (rounded accuracy loss {:.6})",
                outcome.result.selected_old.len(),
                outcome.result.selected_new.len(),
                outcome.result.rounded_accuracy_loss
            );
            println!("report: {}", outcome.report_path.display());
        }
        Command::Adapt => {
            let outcome = commands::run_adapt(&ctx)?;
            println!("adapted checkpoint: {}", outcome.checkpoint.display());
            println!("report: {}", outcome.report_path.display());
        }
        Command::Eval => {
            let outcome = commands::run_eval(&ctx)?;
            let m = outcome.metrics;
            println!(
                "f1 {:.4}  accuracy {:.4}  bacc {:.4}  mcc {:.4}  tpr {:.4}  tnr {:.4}  fpr {:.4}",
                m.f1, m.accuracy, m.bacc, m.mcc, m.tpr, m.tnr, m.fpr
            );
            println!("report: {}", outcome.report_path.display());
        }
        Command::Lifecycle => {
            let outcome = commands::run_lifecycle(&ctx)?;
            println!("window  shifted  adapted   pre_f1  post_f1  origin_f1");
            println!(
                "{:>6}  {:>7}  {:>7}  {:>7.4}  {:>7}  {:>9}",
                0, "-", "-", outcome.initial.f1, "-", "-"
            );
            for row in &outcome.rows {
                let shifted = row
                    .shift
                    .as_ref()
                    .map(|s| s.shifted.to_string())
                    .unwrap_or_else(|| "-".into());
                let post = row
                    .post
                    .as_ref()
                    .map(|m| format!("{:.4}", m.f1))
                    .unwrap_or_else(|| "-".into());
                let origin = row
                    .origin_post
                    .as_ref()
                    .map(|m| format!("{:.4}", m.f1))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:>6}  {:>7}  {:>7}  {:>7.4}  {:>7}  {:>9}",
                    row.window, shifted, row.adapted, row.pre.f1, post, origin
                );
            }
            println!("report: {}", outcome.report_path.display());
        }
        Command::Simulate => {
            let outcome = commands::run_simulate(&ctx)?;
            println!(
                "wrote {} windows and {} test windows under {}",
                outcome.windows.len(),
                outcome.test_windows.len(),
                ctx.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            match error.class() {
                ErrorClass::Config => ExitCode::from(2),
                ErrorClass::Data => ExitCode::from(3),
                ErrorClass::Numerical => ExitCode::from(4),
            }
        }
    }
}
