//! Twin models with and without the trend block on trended synthetic data.
//!
//! `cargo run --release --example ablation -- [seed] [epochs]`

use std::time::Instant;

use chrono::Days;
use trendcast::data::{
    fit_schema, generate_base_sales, inject_trends, split_by_date, store_ids, FeatureConfig, RandomTrends, SynthConfig,
    TrendSpec,
};
use trendcast::eval::ablation_run;
use trendcast::model::ModelConfig;
use trendcast::rng::RngState;
use trendcast::train::TrainConfig;

fn main() -> trendcast::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let epochs: usize = args.next().map_or(60, |s| s.parse().expect("epochs"));

    let synth = SynthConfig {
        n_stores: 50,
        n_days: 720,
        seed,
        ..Default::default()
    };
    let base = generate_base_sales(&synth, &mut RngState::new(seed))?;
    let spec = TrendSpec::random(&store_ids(&base), &RandomTrends::default(), seed)?;
    let records = inject_trends(&base, &spec)?;
    let boundary = synth.start_date + Days::new(600);
    let (train, val) = split_by_date(&records, boundary)?;

    let model = ModelConfig::default();
    let schema = fit_schema(&train, &model.embed_dims, &FeatureConfig::default())?;
    let tc = TrainConfig {
        epochs,
        seed,
        ..Default::default()
    };
    let started = Instant::now();
    let ab = ablation_run(&schema, &train, &val, &model, &tc)?;
    let r = &ab.report;
    let trend = r.rmse_trend.unwrap_or(f64::NAN);
    println!("train rows {}, validation rows {}", train.len(), val.len());
    println!("rmse without trend block {:.1}", r.rmse_overall);
    println!("rmse with trend block    {:.1}", trend);
    println!("ratio                    {:.3}", trend / r.rmse_overall);

    let mut by_slope: Vec<(f64, &String)> = spec.stores.iter().map(|(s, seg)| (seg[0].slope.abs(), s)).collect();
    by_slope.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("steepest stores:");
    for (slope, store) in by_slope.iter().take(5) {
        let s = &r.per_store[*store];
        println!(
            "  store {store:>3} |slope| {slope:.2}  {:.1} -> {:.1}",
            s.rmse,
            s.rmse_trend.unwrap_or(f64::NAN)
        );
    }
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
