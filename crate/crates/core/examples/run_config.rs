//! The full command sequence driven by a TOML file: synth, train both
//! variants, eval, hist.
//!
//! `cargo run --release --example run_config -- [path/to/run.toml]`

use std::path::PathBuf;

use trendcast::cli::{cmd_eval, cmd_hist, cmd_synth, cmd_train};
use trendcast::config::{Overrides, RunConfig};

fn main() -> trendcast::Result<()> {
    let path = std::env::args().nth(1).map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/run.toml"),
        PathBuf::from,
    );
    let cfg = RunConfig::load(&path)?;

    let synth = cmd_synth(&cfg)?;
    println!("synth: {} rows -> {}", synth.rows, synth.data.display());

    let mut baseline = cfg.clone();
    baseline.apply(&Overrides {
        no_trend_block: true,
        ..Default::default()
    });
    for c in [&baseline, &cfg] {
        let out = cmd_train(c)?;
        let last = out.history.last().expect("at least one epoch");
        println!(
            "train: {} (final train loss {:.4})",
            out.checkpoint.display(),
            last.train_loss
        );
    }

    let report = cmd_eval(&cfg, &[], None)?;
    println!(
        "eval: rmse {:.1}, with trend block {:.1}",
        report.rmse_overall,
        report.rmse_trend.unwrap_or(f64::NAN)
    );
    if let Some((a, b)) = report.bias_fit {
        println!("      bias fit {a:.3} * pred + {b:.1}");
    }
    for imp in report.importances.iter().take(3) {
        println!("      {:<20} {:+.1}", imp.feature.name(), imp.delta_rmse);
    }
    for f in cmd_hist(&cfg, None)? {
        println!("hist: {}", f.display());
    }
    Ok(())
}
