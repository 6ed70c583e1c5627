//! Fits `actual ≈ a·pred + b` on validation predictions and reports the
//! corrected RMSE.
//!
//! `cargo run --release --example bias_correction`

use chrono::Days;
use trendcast::data::{fit_schema, generate_base_sales, split_by_date, FeatureConfig, SynthConfig};
use trendcast::eval::{bias_correct_linear, rmse};
use trendcast::model::ModelConfig;
use trendcast::rng::RngState;
use trendcast::train::{train, TrainConfig};

fn main() -> trendcast::Result<()> {
    let synth = SynthConfig {
        n_stores: 10,
        n_days: 300,
        ..Default::default()
    };
    let rows = generate_base_sales(&synth, &mut RngState::new(3))?;
    let (train_rows, val_rows) = split_by_date(&rows, synth.start_date + Days::new(240))?;
    let config = ModelConfig::default();
    let schema = fit_schema(&train_rows, &config.embed_dims, &FeatureConfig::default())?;
    // Deliberately short training leaves a systematic bias to correct.
    let tc = TrainConfig {
        epochs: 4,
        ..Default::default()
    };
    let (model, _) = train(&config, &schema, &schema.encode_batch(&train_rows), None, &tc)?;

    let pred = model.predict(&schema.encode_batch(&val_rows), &schema)?;
    let actual: Vec<f64> = val_rows.iter().map(|r| r.sales).collect();
    let (a, b) = bias_correct_linear(&pred, &actual)?;
    let corrected: Vec<f64> = pred.iter().map(|p| a * p + b).collect();
    println!("fit: actual = {a:.4} * pred + {b:.1}");
    println!("rmse raw       {:.1}", rmse(&pred, &actual)?);
    println!("rmse corrected {:.1}", rmse(&corrected, &actual)?);
    Ok(())
}
