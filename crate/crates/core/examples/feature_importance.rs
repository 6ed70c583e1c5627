//! Permutation importance on trended data with an injected noise column.
//!
//! `cargo run --release --example feature_importance -- [seed] [epochs]`

use chrono::Days;
use trendcast::data::{
    fit_schema, generate_base_sales, inject_trends, split_by_date, store_ids, FeatureConfig, RandomTrends, SynthConfig,
    TrendSpec,
};
use trendcast::eval::permutation_importance;
use trendcast::model::ModelConfig;
use trendcast::rng::RngState;
use trendcast::train::{train, TrainConfig};

fn main() -> trendcast::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let epochs: usize = args.next().map_or(60, |s| s.parse().expect("epochs"));
    let synth = SynthConfig {
        n_stores: 50,
        n_days: 720,
        seed,
        noise_column: true,
        ..Default::default()
    };
    let base = generate_base_sales(&synth, &mut RngState::new(seed))?;
    // Two segments per store so the segment label varies.
    let trends = RandomTrends {
        segments: 2,
        ..Default::default()
    };
    let spec = TrendSpec::random(&store_ids(&base), &trends, seed)?;
    let records = inject_trends(&base, &spec)?;
    let (train_rows, val_rows) = split_by_date(&records, synth.start_date + Days::new(600))?;

    let model_config = ModelConfig {
        dropout_p: 0.1,
        ..Default::default()
    };
    let features = FeatureConfig {
        noise_feature: true,
        ..Default::default()
    };
    let schema = fit_schema(&train_rows, &model_config.embed_dims, &features)?;
    let tc = TrainConfig {
        epochs,
        seed,
        ..Default::default()
    };
    let train_set = schema.encode_batch(&train_rows);
    let (model, _) = train(&model_config, &schema, &train_set, None, &tc)?;

    let imps = permutation_importance(&model, &schema, &val_rows, 20, seed)?;
    println!("{:<20} {:>12} {:>10}", "feature", "delta_rmse", "spread");
    for imp in &imps {
        println!(
            "{:<20} {:>12.2} {:>10.2}",
            imp.feature.name(),
            imp.delta_rmse,
            imp.spread()
        );
    }
    Ok(())
}
