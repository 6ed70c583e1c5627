use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use trendcast::cli::{cmd_eval, cmd_hist, cmd_importance, cmd_synth, cmd_train};
use trendcast::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "trendcast",
    version,
    about = "Sales forecasting with a trend-correction block"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reseeds synthesis, trend drawing and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First validation date (YYYY-MM-DD).
    #[arg(long)]
    split: Option<NaiveDate>,
    /// Train without the trend block.
    #[arg(long)]
    no_trend_block: bool,
}

#[derive(Args)]
struct StoreFilter {
    /// Restrict to one store.
    #[arg(long)]
    store: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its trend manifest.
    Synth(Common),
    /// Train a model and write its checkpoint and loss history.
    Train(Common),
    /// Score checkpoints on the validation window.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        filter: StoreFilter,
        /// Baseline checkpoint, then optionally the trend checkpoint.
        checkpoints: Vec<PathBuf>,
    },
    /// Train and validation sales histograms.
    Hist {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        filter: StoreFilter,
    },
    /// Permutation feature importance.
    Importance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        filter: StoreFilter,
        checkpoint: Option<PathBuf>,
    },
}

fn config(c: &Common) -> trendcast::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        out_dir: c.out.clone(),
        split: c.split,
        no_trend_block: c.no_trend_block,
    });
    Ok(cfg)
}

fn run(cli: Cli) -> trendcast::Result<()> {
    match cli.command {
        Command::Synth(c) => {
            let o = cmd_synth(&config(&c)?)?;
            println!(
                "wrote {} rows to {} and {}",
                o.rows,
                o.data.display(),
                o.manifest.display()
            );
        }
        Command::Train(c) => {
            let o = cmd_train(&config(&c)?)?;
            let last = o.history.last().expect("at least one epoch");
            println!(
                "trained {} epochs, train loss {:.5}, val loss {}",
                o.history.len(),
                last.train_loss,
                last.val_loss.map_or_else(|| "-".into(), |v| format!("{v:.5}"))
            );
            println!("wrote {} and {}", o.checkpoint.display(), o.history_path.display());
        }
        Command::Eval {
            common,
            filter,
            checkpoints,
        } => {
            let r = cmd_eval(&config(&common)?, &checkpoints, filter.store.as_deref())?;
            println!("rmse {:.2}", r.rmse_overall);
            if let Some(t) = r.rmse_trend {
                println!("rmse_trend {t:.2}");
            }
        }
        Command::Hist { common, filter } => {
            for p in cmd_hist(&config(&common)?, filter.store.as_deref())? {
                println!("wrote {}", p.display());
            }
        }
        Command::Importance {
            common,
            filter,
            checkpoint,
        } => {
            let r = cmd_importance(&config(&common)?, checkpoint.as_deref(), filter.store.as_deref())?;
            for i in &r.importances {
                println!("{:<20} {:.3}", i.feature.name(), i.delta_rmse);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
