//! Tape gradients against central differences, one primitive at a time
//! and then through the whole model.
//!
//! `cargo run --example grad_check`

use trendcast::autograd::{grad_check, grad_check_many, Mode, Tensor};
use trendcast::data::{fit_schema, generate_base_sales, EmbedDims, FeatureConfig, SynthConfig};
use trendcast::model::{ForwardRng, Model, ModelConfig};
use trendcast::rng::RngState;

fn random(rng: &mut RngState, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
}

fn main() -> trendcast::Result<()> {
    let mut rng = RngState::new(0);
    let x = random(&mut rng, 8, 5);
    let w = random(&mut rng, 5, 3);
    let b = random(&mut rng, 1, 3);
    let target = random(&mut rng, 8, 3);

    let affine_relu = grad_check_many(
        |t, v| {
            let h = t.affine(v[0], v[1], v[2])?;
            let h = t.relu(h);
            let y = t.leaf(target.clone(), false);
            t.mse_loss(h, y)
        },
        &[x.clone(), w, b],
        1e-6,
    )?;
    println!("affine + relu      {affine_relu:.2e}");

    let table = random(&mut rng, 4, 3);
    let gather = grad_check(
        |t, v| {
            let e = t.embed_gather(v, &[0, 3, 3, 1, 2, 0, 1, 3])?;
            let y = t.leaf(target.clone(), false);
            t.mse_loss(e, y)
        },
        &table,
        1e-6,
    )?;
    println!("embedding gather   {gather:.2e}");

    let rows = generate_base_sales(
        &SynthConfig {
            n_stores: 2,
            n_days: 20,
            ..Default::default()
        },
        &mut rng,
    )?;
    let config = ModelConfig {
        embed_dims: EmbedDims { store: 2, customers: 2 },
        input_block_width: 8,
        main_block_widths: vec![8, 4],
        trend_block_width: 4,
        ..Default::default()
    };
    let schema = fit_schema(&rows, &config.embed_dims, &FeatureConfig::default())?;
    let batch = schema.encode_batch(&rows[..8]);
    let mut model = Model::new(config, &schema, 1)?;
    // Nonzero biases keep ReLU inputs off the kink.
    for t in model.params_mut().tensors_mut() {
        if t.rows() == 1 {
            t.data_mut().iter_mut().for_each(|v| *v = rng.uniform_range(-0.1, 0.1));
        }
    }
    let params: Vec<Tensor> = model.params().tensors().into_iter().cloned().collect();
    let full = grad_check_many(
        |tape, vars| {
            let (_, _, y) = model.forward_with(tape, vars, &batch, Mode::Eval, &mut ForwardRng::new(0))?;
            Model::loss(tape, y, &batch.target)
        },
        &params,
        1e-6,
    )?;
    println!("full model ({} parameters) {full:.2e}", model.params().count());
    Ok(())
}
