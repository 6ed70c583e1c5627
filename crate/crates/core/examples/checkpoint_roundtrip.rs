//! Save a model, load it back and compare predictions bit for bit.
//!
//! `cargo run --example checkpoint_roundtrip`

use trendcast::checkpoint::{load_model, save_model, Checkpoint};
use trendcast::data::{fit_schema, generate_base_sales, FeatureConfig, SynthConfig};
use trendcast::model::{Model, ModelConfig};
use trendcast::rng::RngState;

fn main() -> trendcast::Result<()> {
    let rows = generate_base_sales(
        &SynthConfig {
            n_stores: 4,
            n_days: 60,
            ..Default::default()
        },
        &mut RngState::new(0),
    )?;
    let config = ModelConfig::default();
    let schema = fit_schema(&rows, &config.embed_dims, &FeatureConfig::default())?;
    let model = Model::new(config, &schema, 42)?;

    let dir = std::env::temp_dir().join("trendcast-checkpoint");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.json");
    save_model(&path, &model, &schema, 42)?;

    let ckpt = Checkpoint::load(&path)?;
    println!("{} v{}, seed {}", ckpt.format, ckpt.version, ckpt.seed);
    for p in &ckpt.parameters {
        println!("  {:<22} {:?}", p.name, p.shape);
    }

    let (back, back_schema) = load_model(&path)?;
    let batch = schema.encode_batch(&rows);
    let a = model.predict(&batch, &schema)?;
    let b = back.predict(&batch, &back_schema)?;
    let same = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("{} predictions identical: {same}", a.len());
    Ok(())
}
