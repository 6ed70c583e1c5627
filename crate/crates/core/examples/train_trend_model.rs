//! Trains the trend model on trended synthetic data, prints the loss curve
//! and saves a checkpoint.
//!
//! `cargo run --release --example train_trend_model -- [epochs]`

use chrono::Days;
use trendcast::checkpoint::save_model;
use trendcast::data::{
    fit_schema, generate_base_sales, inject_trends, split_by_date, store_ids, FeatureConfig, RandomTrends, SynthConfig,
    TrendSpec,
};
use trendcast::eval::rmse;
use trendcast::model::ModelConfig;
use trendcast::rng::RngState;
use trendcast::train::{train, OptimizerKind, TrainConfig};

fn main() -> trendcast::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(30, |s| s.parse().expect("epochs"));
    let synth = SynthConfig {
        n_stores: 20,
        n_days: 500,
        ..Default::default()
    };
    let base = generate_base_sales(&synth, &mut RngState::new(0))?;
    let spec = TrendSpec::random(&store_ids(&base), &RandomTrends::default(), 0)?;
    let records = inject_trends(&base, &spec)?;
    let (train_rows, val_rows) = split_by_date(&records, synth.start_date + Days::new(420))?;

    let model_config = ModelConfig::default();
    let schema = fit_schema(&train_rows, &model_config.embed_dims, &FeatureConfig::default())?;
    let tc = TrainConfig {
        epochs,
        optimizer: OptimizerKind::default(),
        early_stopping_patience: Some(10),
        ..Default::default()
    };
    let (model, history) = train(
        &model_config,
        &schema,
        &schema.encode_batch(&train_rows),
        Some(&schema.encode_batch(&val_rows)),
        &tc,
    )?;
    for e in history.epochs.iter().step_by(5) {
        println!(
            "epoch {:>3}  lr {:.1e}  train {:.4}  val {:.4}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.val_loss.unwrap_or(f64::NAN)
        );
    }

    let pred = model.predict(&schema.encode_batch(&val_rows), &schema)?;
    let actual: Vec<f64> = val_rows.iter().map(|r| r.sales).collect();
    println!("validation rmse {:.1}", rmse(&pred, &actual)?);

    std::fs::create_dir_all("out")?;
    save_model("out/trend.json", &model, &schema, tc.seed)?;
    history.write_csv("out/history_trend.csv")?;
    println!("saved out/trend.json ({} parameters)", model.params().count());
    Ok(())
}
