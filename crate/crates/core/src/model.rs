//! Forecasting network with a trend-correction block.
//!
//! ```text
//! x      = concat(embeddings, one-hot, numeric)
//! h      = relu(x · W_in + b_in)                         input block
//! y_main = main block(h)           (affine → relu → dropout)* → affine
//! w      = trend block(h)          affine → relu → dropout → affine
//! ŷ      = y_main + w ⊙ t                                in z-scored sales
//! ```
//!
//! With the trend block disabled `w` is identically zero. The trend weight
//! has no output activation so it can take either sign.

use serde::{Deserialize, Serialize};

use crate::autograd::{Mode, Tape, Tensor, Var};
use crate::data::{EmbedDims, EncodedBatch, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dims: EmbedDims,
    pub input_block_width: usize,
    pub main_block_widths: Vec<usize>,
    pub trend_block_width: usize,
    pub dropout_p: f64,
    pub trend_block_enabled: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dims: EmbedDims::default(),
            input_block_width: 128,
            main_block_widths: vec![128, 64],
            trend_block_width: 32,
            dropout_p: 0.2,
            trend_block_enabled: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let widths_ok = self.input_block_width >= 1
            && self.trend_block_width >= 1
            && self.main_block_widths.iter().all(|&w| w >= 1)
            && self.embed_dims.store >= 1
            && self.embed_dims.customers >= 1;
        if !widths_ok {
            return Err(Error::Config("all layer widths must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in × out`.
    pub weight: Tensor,
    /// `1 × out`.
    pub bias: Tensor,
}

impl Linear {
    /// He-uniform weights in `±√(6 / fan_in)`, zero bias.
    pub fn he_uniform(fan_in: usize, fan_out: usize, rng: &mut RngState) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        Self {
            weight: Tensor::matrix(fan_in, fan_out, data).expect("shape"),
            bias: Tensor::zeros(vec![1, fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendBlock {
    pub hidden: Linear,
    pub output: Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One `vocab × dim` table per embedded variable, in schema order.
    pub embeddings: Vec<Tensor>,
    pub input: Linear,
    pub main_hidden: Vec<Linear>,
    pub main_output: Linear,
    pub trend: Option<TrendBlock>,
}

impl ModelParams {
    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.embeddings.iter().collect();
        out.push(&self.input.weight);
        out.push(&self.input.bias);
        for l in &self.main_hidden {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.main_output.weight);
        out.push(&self.main_output.bias);
        if let Some(t) = &self.trend {
            out.extend([&t.hidden.weight, &t.hidden.bias, &t.output.weight, &t.output.bias]);
        }
        out
    }

    /// Mutable view in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.embeddings.iter_mut().collect();
        out.push(&mut self.input.weight);
        out.push(&mut self.input.bias);
        for l in &mut self.main_hidden {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.main_output.weight);
        out.push(&mut self.main_output.bias);
        if let Some(t) = &mut self.trend {
            out.extend([
                &mut t.hidden.weight,
                &mut t.hidden.bias,
                &mut t.output.weight,
                &mut t.output.bias,
            ]);
        }
        out
    }

    /// Names matching [`ModelParams::tensors`], given the embedded
    /// variable names.
    pub fn names(&self, embedded: &[&str]) -> Vec<String> {
        let mut out: Vec<String> = embedded.iter().map(|e| format!("embed.{e}")).collect();
        out.extend(["input.weight".into(), "input.bias".into()]);
        for i in 0..self.main_hidden.len() {
            out.push(format!("main.{i}.weight"));
            out.push(format!("main.{i}.bias"));
        }
        out.extend(["main.out.weight".into(), "main.out.bias".into()]);
        if self.trend.is_some() {
            out.extend([
                "trend.hidden.weight".into(),
                "trend.hidden.bias".into(),
                "trend.out.weight".into(),
                "trend.out.bias".into(),
            ]);
        }
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Dropout streams for the main and trend blocks, kept apart so the twin
/// models of an ablation see the same main-block masks.
#[derive(Clone, Debug)]
pub struct ForwardRng {
    pub main: RngState,
    pub trend: RngState,
}

impl ForwardRng {
    pub fn new(seed: u64) -> Self {
        let root = RngState::new(seed);
        Self {
            main: root.fork(20),
            trend: root.fork(21),
        }
    }
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Parameter leaves, in [`ModelParams::tensors`] order.
    pub params: Vec<Var>,
    pub y_main: Var,
    pub weight: Var,
    pub y_hat: Var,
}

/// Plain values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub y_main: Tensor,
    pub weight: Tensor,
    pub y_hat: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    config: ModelConfig,
    params: ModelParams,
}

impl Model {
    /// Fresh parameters for inputs laid out by `schema`. Main-path and
    /// trend-block parameters come from separate streams of `seed`, so
    /// toggling the trend block leaves the rest of the initialization
    /// unchanged.
    pub fn new(config: ModelConfig, schema: &FeatureSchema, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = RngState::new(seed);
        let mut rng = root.fork(10);
        let embeddings = schema
            .embeddings
            .iter()
            .map(|v| {
                let data = (0..v.size() * v.dim).map(|_| rng.uniform_range(-0.05, 0.05)).collect();
                Tensor::matrix(v.size(), v.dim, data).expect("shape")
            })
            .collect();
        let input = Linear::he_uniform(schema.input_width(), config.input_block_width, &mut rng);
        let mut width = config.input_block_width;
        let mut main_hidden = Vec::new();
        for &w in &config.main_block_widths {
            main_hidden.push(Linear::he_uniform(width, w, &mut rng));
            width = w;
        }
        let main_output = Linear::he_uniform(width, 1, &mut rng);
        let trend = config.trend_block_enabled.then(|| {
            let mut rng = root.fork(11);
            TrendBlock {
                hidden: Linear::he_uniform(config.input_block_width, config.trend_block_width, &mut rng),
                output: Linear::he_uniform(config.trend_block_width, 1, &mut rng),
            }
        });
        let params = ModelParams {
            embeddings,
            input,
            main_hidden,
            main_output,
            trend,
        };
        Self::from_parts(config, params, schema)
    }

    /// Wraps existing parameters after checking every shape against the
    /// config and schema.
    pub fn from_parts(config: ModelConfig, params: ModelParams, schema: &FeatureSchema) -> Result<Self> {
        config.validate()?;
        let bad = |what: String| Err(Error::Config(format!("parameter shape mismatch: {what}")));
        if params.embeddings.len() != schema.embeddings.len() {
            return bad("embedding count".into());
        }
        for (t, v) in params.embeddings.iter().zip(&schema.embeddings) {
            if t.shape() != [v.size(), v.dim] {
                return bad(format!("embedding for {:?}", v.feature));
            }
        }
        let check = |l: &Linear, fan_in: usize, fan_out: usize| {
            l.weight.shape() == [fan_in, fan_out] && l.bias.shape() == [1, fan_out]
        };
        if !check(&params.input, schema.input_width(), config.input_block_width) {
            return bad("input block".into());
        }
        if params.main_hidden.len() != config.main_block_widths.len() {
            return bad("main block depth".into());
        }
        let mut width = config.input_block_width;
        for (l, &w) in params.main_hidden.iter().zip(&config.main_block_widths) {
            if !check(l, width, w) {
                return bad("main block layer".into());
            }
            width = w;
        }
        if !check(&params.main_output, width, 1) {
            return bad("main output".into());
        }
        match (&params.trend, config.trend_block_enabled) {
            (Some(t), true) => {
                if !check(&t.hidden, config.input_block_width, config.trend_block_width)
                    || !check(&t.output, config.trend_block_width, 1)
                {
                    return bad("trend block".into());
                }
            }
            (None, false) => {}
            _ => return bad("trend block presence".into()),
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn into_parts(self) -> (ModelConfig, ModelParams) {
        (self.config, self.params)
    }

    /// Records a forward pass on `tape`, borrowing parameters and batch.
    pub fn trace<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        batch: &EncodedBatch,
        mode: Mode,
        rng: &mut ForwardRng,
        requires_grad: bool,
    ) -> Result<Trace> {
        let params: Vec<Var> = self
            .params
            .tensors()
            .into_iter()
            .map(|t| tape.leaf_ref(t, requires_grad))
            .collect();
        let (y_main, weight, y_hat) = self.forward_with(tape, &params, batch, mode, rng)?;
        Ok(Trace {
            params,
            y_main,
            weight,
            y_hat,
        })
    }

    /// Forward pass with parameters already placed on the tape, in
    /// [`ModelParams::tensors`] order. Returns `(y_main, w, ŷ)`.
    pub fn forward_with(
        &self,
        tape: &mut Tape<'_>,
        params: &[Var],
        batch: &EncodedBatch,
        mode: Mode,
        rng: &mut ForwardRng,
    ) -> Result<(Var, Var, Var)> {
        let n_embed = self.params.embeddings.len();
        if batch.embed_indices.len() != n_embed {
            return Err(Error::Config(format!(
                "batch has {} embedded variables, model expects {n_embed}",
                batch.embed_indices.len()
            )));
        }
        let expected_in = self.params.input.fan_in();
        let embed_width: usize = self.params.embeddings.iter().map(|t| t.cols()).sum();
        let got_in = embed_width + batch.onehot.cols() + batch.numeric.cols();
        if got_in != expected_in {
            return Err(Error::Config(format!(
                "batch encodes {got_in} input columns, model expects {expected_in}"
            )));
        }
        if params.len() != self.params.tensors().len() {
            return Err(Error::Config("parameter handle count mismatch".into()));
        }

        let p = self.config.dropout_p;
        let mut next = params.iter().copied();
        let mut take = || next.next().expect("counted above");

        let mut parts = Vec::with_capacity(n_embed + 2);
        for ix in &batch.embed_indices {
            let table = take();
            parts.push(tape.embed_gather(table, ix)?);
        }
        parts.push(tape.leaf(batch.onehot.clone(), false));
        if batch.numeric.cols() > 0 {
            parts.push(tape.leaf(batch.numeric.clone(), false));
        }
        let x = tape.concat_cols(&parts)?;

        let (w_in, b_in) = (take(), take());
        let h = tape.affine(x, w_in, b_in)?;
        let h = tape.relu(h);

        let mut z = h;
        for _ in &self.params.main_hidden {
            let (w, b) = (take(), take());
            let a = tape.affine(z, w, b)?;
            let a = tape.relu(a);
            z = tape.dropout(a, p, mode, &mut rng.main)?;
        }
        let (w_out, b_out) = (take(), take());
        let y_main = tape.affine(z, w_out, b_out)?;

        let weight = if self.params.trend.is_some() {
            let (w1, b1, w2, b2) = (take(), take(), take(), take());
            let a = tape.affine(h, w1, b1)?;
            let a = tape.relu(a);
            let a = tape.dropout(a, p, mode, &mut rng.trend)?;
            tape.affine(a, w2, b2)?
        } else {
            tape.leaf(Tensor::zeros(vec![batch.len(), 1]), false)
        };
        let time = tape.leaf(batch.time.clone(), false);
        let y_hat = tape.scalar_mul_add(y_main, weight, time)?;
        Ok((y_main, weight, y_hat))
    }

    pub fn forward(&self, batch: &EncodedBatch, mode: Mode, rng: &mut ForwardRng) -> Result<ForwardOutput> {
        let mut tape = Tape::new();
        let tr = self.trace(&mut tape, batch, mode, rng, false)?;
        Ok(ForwardOutput {
            y_main: tape.value(tr.y_main).clone(),
            weight: tape.value(tr.weight).clone(),
            y_hat: tape.value(tr.y_hat).clone(),
        })
    }

    /// Mean squared error of `ŷ` against the batch's z-scored target.
    pub fn loss(tape: &mut Tape<'_>, y_hat: Var, target: &Tensor) -> Result<Var> {
        let t = tape.leaf(target.clone(), false);
        tape.mse_loss(y_hat, t)
    }

    /// Eval-mode loss on a whole batch, without building gradients.
    pub fn eval_loss(&self, batch: &EncodedBatch) -> Result<f64> {
        let mut tape = Tape::new();
        let mut rng = ForwardRng::new(0);
        let tr = self.trace(&mut tape, batch, Mode::Eval, &mut rng, false)?;
        let loss = Self::loss(&mut tape, tr.y_hat, &batch.target)?;
        Ok(tape.value(loss).item())
    }

    /// Denormalized sales predictions with dropout disabled.
    pub fn predict(&self, batch: &EncodedBatch, schema: &FeatureSchema) -> Result<Vec<f64>> {
        let out = self.forward(batch, Mode::Eval, &mut ForwardRng::new(0))?;
        Ok(out.y_hat.data().iter().map(|&z| schema.denormalize_target(z)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check_many;
    use crate::data::{
        fit_schema, generate_base_sales, Feature, FeatureConfig, OneHotLayout, Standardizer, SynthConfig, Vocabulary,
    };
    use chrono::NaiveDate;

    fn tiny_config(trend: bool) -> ModelConfig {
        ModelConfig {
            embed_dims: EmbedDims { store: 2, customers: 2 },
            input_block_width: 8,
            main_block_widths: vec![8, 4],
            trend_block_width: 4,
            dropout_p: 0.2,
            trend_block_enabled: trend,
        }
    }

    fn small_data(seed: u64) -> (FeatureSchema, EncodedBatch) {
        let cfg = SynthConfig {
            n_stores: 3,
            n_days: 30,
            seed,
            ..Default::default()
        };
        let rows = generate_base_sales(&cfg, &mut RngState::new(seed)).unwrap();
        let schema = fit_schema(&rows, &EmbedDims { store: 2, customers: 2 }, &FeatureConfig::default()).unwrap();
        let batch = schema.encode_batch(&rows);
        (schema, batch)
    }

    fn linear(w: &[&[f64]], b: &[f64]) -> Linear {
        Linear {
            weight: Tensor::from_rows(w),
            bias: Tensor::from_rows(&[b]),
        }
    }

    /// One embedded store column of width 1 and a one-column one-hot.
    fn hand_schema() -> FeatureSchema {
        FeatureSchema {
            embeddings: vec![Vocabulary {
                feature: Feature::Store,
                index: [("A".to_string(), 1)].into_iter().collect(),
                dim: 1,
            }],
            onehots: vec![OneHotLayout {
                feature: Feature::StoreType,
                columns: [("a".to_string(), 0)].into_iter().collect(),
            }],
            numerics: vec![],
            competition_fill: 0.0,
            target: Standardizer {
                mean: 1000.0,
                std: 200.0,
            },
            time_bounds: (
                NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2015, 1, 3).unwrap(),
            ),
            config: FeatureConfig::default(),
        }
    }

    fn hand_model() -> (Model, FeatureSchema, EncodedBatch) {
        let schema = hand_schema();
        let config = ModelConfig {
            input_block_width: 2,
            main_block_widths: vec![2],
            trend_block_width: 2,
            ..tiny_config(true)
        };
        let params = ModelParams {
            embeddings: vec![Tensor::from_rows(&[&[0.0], &[0.5]])],
            input: linear(&[&[1.0, -1.0], &[2.0, 0.5]], &[0.1, -0.2]),
            main_hidden: vec![linear(&[&[0.5, -1.0], &[1.0, 1.0]], &[0.0, 0.3])],
            main_output: linear(&[&[2.0], &[-1.0]], &[0.25]),
            trend: Some(TrendBlock {
                hidden: linear(&[&[1.0, 0.0], &[0.0, 1.0]], &[-0.5, 0.0]),
                output: linear(&[&[0.4], &[3.0]], &[-0.1]),
            }),
        };
        let batch = EncodedBatch {
            embed_indices: vec![vec![1, 0]],
            onehot: Tensor::from_rows(&[&[1.0], &[0.0]]),
            numeric: Tensor::zeros(vec![2, 0]),
            time: Tensor::column(vec![0.5, 1.5]),
            target: Tensor::column(vec![0.0, 0.0]),
        };
        (Model::from_parts(config, params, &schema).unwrap(), schema, batch)
    }

    #[test]
    fn hand_computed_forward() {
        // Row 0: x = [0.5, 1]  h = [2.6, 0]  z = [1.3, 0]     y = 2.85  w = 0.74
        // Row 1: x = [0, 0]    h = [0.1, 0]  z = [0.05, 0.2]  y = 0.15  w = -0.1
        let (model, schema, batch) = hand_model();
        let out = model.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(out.y_main.data(), &[2.85, 0.15]), "{:?}", out.y_main);
        assert!(close(out.weight.data(), &[0.74, -0.1]), "{:?}", out.weight);
        assert!(close(out.y_hat.data(), &[3.22, 0.0]), "{:?}", out.y_hat);
        let pred = model.predict(&batch, &schema).unwrap();
        assert!(close(&pred, &[1644.0, 1000.0]), "{pred:?}");
    }

    #[test]
    fn disabled_trend_block_returns_main_output() {
        let (schema, batch) = small_data(0);
        let model = Model::new(tiny_config(false), &schema, 3).unwrap();
        let out = model.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
        assert_eq!(out.y_hat, out.y_main);
        assert!(out.weight.data().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn zero_time_ignores_trend_weight() {
        let (schema, mut batch) = small_data(1);
        batch.time = Tensor::zeros(vec![batch.len(), 1]);
        let model = Model::new(tiny_config(true), &schema, 4).unwrap();
        let out = model.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
        assert!(out.weight.data().iter().any(|&w| w != 0.0));
        assert_eq!(out.y_hat, out.y_main);
    }

    #[test]
    fn zeroed_trend_output_matches_disabled_block() {
        for seed in 0..3 {
            let (schema, batch) = small_data(seed);
            let off = Model::new(tiny_config(false), &schema, seed).unwrap();
            let mut on = Model::new(tiny_config(true), &schema, seed).unwrap();
            let t = on.params_mut().trend.as_mut().unwrap();
            t.output.weight = Tensor::zeros(vec![4, 1]);
            t.output.bias = Tensor::zeros(vec![1, 1]);
            let a = off.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
            let b = on.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
            assert_eq!(a.y_hat, b.y_hat);
        }
    }

    #[test]
    fn trend_toggle_keeps_main_initialization() {
        let (schema, _) = small_data(0);
        let off = Model::new(tiny_config(false), &schema, 9).unwrap();
        let on = Model::new(tiny_config(true), &schema, 9).unwrap();
        assert_eq!(off.params().input, on.params().input);
        assert_eq!(off.params().main_hidden, on.params().main_hidden);
        assert_eq!(off.params().embeddings, on.params().embeddings);
    }

    fn trend_grads(model: &Model, batch: &EncodedBatch) -> Vec<Vec<f64>> {
        let mut tape = Tape::new();
        let tr = model
            .trace(&mut tape, batch, Mode::Eval, &mut ForwardRng::new(0), true)
            .unwrap();
        let loss = Model::loss(&mut tape, tr.y_hat, &batch.target).unwrap();
        tape.backward(loss).unwrap();
        let n = tr.params.len();
        tr.params[n - 4..].iter().map(|&v| tape.take_grad(v).unwrap()).collect()
    }

    #[test]
    fn trend_block_receives_gradient_only_through_time() {
        let (schema, mut batch) = small_data(2);
        let model = Model::new(tiny_config(true), &schema, 5).unwrap();
        let grads = trend_grads(&model, &batch);
        assert!(grads.iter().flatten().any(|&g| g != 0.0));

        batch.time = Tensor::zeros(vec![batch.len(), 1]);
        let grads = trend_grads(&model, &batch);
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_depends_on_trend_term() {
        let (schema, batch) = small_data(3);
        let on = Model::new(tiny_config(true), &schema, 1).unwrap();
        let mut zeroed = on.clone();
        let t = zeroed.params_mut().trend.as_mut().unwrap();
        t.output.weight = Tensor::zeros(vec![4, 1]);
        t.output.bias = Tensor::zeros(vec![1, 1]);
        assert_ne!(on.eval_loss(&batch).unwrap(), zeroed.eval_loss(&batch).unwrap());
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let (model, _, mut batch) = hand_model();
        let out = model.forward(&batch, Mode::Eval, &mut ForwardRng::new(0)).unwrap();
        batch.target = out.y_hat;
        assert_eq!(model.eval_loss(&batch).unwrap(), 0.0);
    }

    #[test]
    fn zero_output_predicts_training_mean() {
        let (mut model, schema, batch) = hand_model();
        let p = model.params_mut();
        p.main_output = linear(&[&[0.0], &[0.0]], &[0.0]);
        p.trend.as_mut().unwrap().output = linear(&[&[0.0], &[0.0]], &[0.0]);
        assert_eq!(model.predict(&batch, &schema).unwrap(), vec![1000.0, 1000.0]);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let (schema, batch) = small_data(4);
        let model = Model::new(tiny_config(true), &schema, 2).unwrap();
        let a = model.predict(&batch, &schema).unwrap();
        let b = model.predict(&batch, &schema).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_mode_dropout_is_stochastic() {
        let (schema, batch) = small_data(4);
        let model = Model::new(tiny_config(true), &schema, 2).unwrap();
        let mut rng = ForwardRng::new(0);
        let a = model.forward(&batch, Mode::Train, &mut rng).unwrap();
        let b = model.forward(&batch, Mode::Train, &mut rng).unwrap();
        assert_ne!(a.y_hat, b.y_hat);
    }

    #[test]
    fn row_permutation_permutes_outputs() {
        let (schema, batch) = small_data(5);
        let model = Model::new(tiny_config(true), &schema, 6).unwrap();
        let perm = RngState::new(11).permutation(batch.len());
        let base = model.predict(&batch, &schema).unwrap();
        let shuffled = model.predict(&batch.select(&perm), &schema).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(shuffled[i], base[p]);
        }
    }

    #[test]
    fn full_model_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (schema, batch) = small_data(seed);
            let rows: Vec<usize> = (0..8).map(|i| i * 11).collect();
            let batch = batch.select(&rows);
            let mut model = Model::new(tiny_config(true), &schema, seed).unwrap();
            // Zero biases put dead units exactly on the ReLU kink.
            let mut rng = RngState::new(100 + seed);
            for t in model.params_mut().tensors_mut() {
                if t.rows() == 1 {
                    t.data_mut().iter_mut().for_each(|b| *b = rng.uniform_range(-0.1, 0.1));
                }
            }
            let inputs: Vec<Tensor> = model.params().tensors().into_iter().cloned().collect();
            let err = grad_check_many(
                |tape, vars| {
                    let (_, _, y) = model.forward_with(tape, vars, &batch, Mode::Eval, &mut ForwardRng::new(0))?;
                    Model::loss(tape, y, &batch.target)
                },
                &inputs,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn mismatched_batch_is_a_config_error() {
        let (schema, batch) = small_data(0);
        let model = Model::new(tiny_config(true), &schema, 0).unwrap();
        let mut bad = batch.clone();
        bad.onehot = Tensor::zeros(vec![batch.len(), 1]);
        assert!(matches!(model.predict(&bad, &schema), Err(Error::Config(_))));
        let mut bad = batch;
        bad.embed_indices.pop();
        assert!(matches!(model.predict(&bad, &schema), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let (schema, _) = small_data(0);
        let mut c = tiny_config(true);
        c.dropout_p = 1.0;
        assert!(Model::new(c, &schema, 0).is_err());
        let mut c = tiny_config(true);
        c.main_block_widths = vec![4, 0];
        assert!(Model::new(c, &schema, 0).is_err());
    }

    #[test]
    fn from_parts_checks_shapes() {
        let (model, schema, _) = hand_model();
        let (config, mut params) = model.into_parts();
        params.main_output = linear(&[&[1.0]], &[0.0]);
        assert!(Model::from_parts(config, params, &schema).is_err());
    }
}
