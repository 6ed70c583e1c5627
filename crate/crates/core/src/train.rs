//! Mini-batch training with Adam or momentum SGD.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autograd::{Mode, Tape, Tensor};
use crate::data::{EncodedBatch, FeatureSchema};
use crate::error::{Error, Result};
use crate::model::{ForwardRng, Model, ModelConfig};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    SgdMomentum { momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant,
    StepDecay { factor: f64, period: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Self::StepDecay {
            factor: 0.5,
            period: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub base_lr: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop after this many epochs without a validation improvement.
    pub early_stopping_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 256,
            optimizer: OptimizerKind::default(),
            base_lr: 1e-3,
            schedule: Schedule::default(),
            seed: 0,
            shuffle: true,
            early_stopping_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.base_lr > 0.0) || !self.base_lr.is_finite() {
            return Err(Error::Config(format!("base_lr {} must be positive", self.base_lr)));
        }
        match self.schedule {
            Schedule::StepDecay { factor, period } if !(factor > 0.0) || period == 0 => {
                return Err(Error::Config("step decay needs factor > 0 and period ≥ 1".into()));
            }
            _ => {}
        }
        match self.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                    return Err(Error::Config("adam needs betas in [0, 1) and eps > 0".into()));
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::Config("momentum must lie in [0, 1)".into()));
                }
            }
        }
        Ok(())
    }
}

/// Learning rate for a zero-based epoch.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::Parameter(format!("epoch {epoch} outside 0..{}", config.epochs)));
    }
    Ok(match config.schedule {
        Schedule::Constant => config.base_lr,
        Schedule::StepDecay { factor, period } => config.base_lr * factor.powi((epoch / period) as i32),
    })
}

/// Per-parameter optimizer moments.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: &[&Tensor]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        let second = match kind {
            OptimizerKind::Adam { .. } => zeros(),
            OptimizerKind::SgdMomentum { .. } => Vec::new(),
        };
        Self {
            kind,
            first: zeros(),
            second,
            steps: 0,
        }
    }

    /// Updates `params` in place from `grads`, then zeroes `grads`.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &mut [Vec<f64>], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Parameter(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
            if p.len() != g.len() || p.len() != self.first[i].len() {
                return Err(Error::dim("optimizer_step", p.shape(), &[g.len()]));
            }
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads.iter()).zip(&mut self.first) {
                    for ((x, &gj), vj) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                        *vj = momentum * *vj + gj;
                        *x -= lr * *vj;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.steps as i32);
                let c2 = 1.0 - beta2.powi(self.steps as i32);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads.iter())
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((x, &gj), mj), vj) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mj = beta1 * *mj + (1.0 - beta1) * gj;
                        *vj = beta2 * *vj + (1.0 - beta2) * gj * gj;
                        *x -= lr * (*mj / c1) / ((*vj / c2).sqrt() + eps);
                    }
                }
            }
        }
        for g in grads.iter_mut() {
            g.fill(0.0);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn first(&self) -> Option<&EpochRecord> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch,lr,train_loss,val_loss`; a missing validation loss is left
    /// empty.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["epoch", "lr", "train_loss", "val_loss"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.lr.to_string(),
                e.train_loss.to_string(),
                e.val_loss.map_or_else(String::new, |v| v.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss and parameter gradients of one train-mode step.
fn batch_gradients(model: &Model, batch: &EncodedBatch, rng: &mut ForwardRng) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let tr = model.trace(&mut tape, batch, Mode::Train, rng, true)?;
    let loss = Model::loss(&mut tape, tr.y_hat, &batch.target)?;
    tape.backward(loss)?;
    let value = tape.value(loss).item();
    let grads = tr
        .params
        .iter()
        .map(|&v| {
            let n = tape.value(v).len();
            tape.take_grad(v).unwrap_or_else(|| vec![0.0; n])
        })
        .collect();
    Ok((value, grads))
}

/// One optimizer step on `batch`; returns the pre-step loss.
pub fn train_step(
    model: &mut Model,
    optimizer: &mut Optimizer,
    batch: &EncodedBatch,
    lr: f64,
    rng: &mut ForwardRng,
) -> Result<f64> {
    let (loss, mut grads) = batch_gradients(model, batch, rng)?;
    optimizer.step(&mut model.params_mut().tensors_mut(), &mut grads, lr)?;
    Ok(loss)
}

/// Trains a fresh model. Initialization is seeded from `config.seed`;
/// shuffling and dropout draw from their own forks of it.
pub fn train(
    model_config: &ModelConfig,
    schema: &FeatureSchema,
    train_set: &EncodedBatch,
    val_set: Option<&EncodedBatch>,
    config: &TrainConfig,
) -> Result<(Model, LossHistory)> {
    let model = Model::new(model_config.clone(), schema, config.seed)?;
    train_model(model, train_set, val_set, config)
}

/// Continues training `model` under `config`.
pub fn train_model(
    mut model: Model,
    train_set: &EncodedBatch,
    val_set: Option<&EncodedBatch>,
    config: &TrainConfig,
) -> Result<(Model, LossHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let root = RngState::new(config.seed);
    let mut shuffle_rng = root.fork(1);
    let mut dropout_rng = ForwardRng {
        main: root.fork(2),
        trend: root.fork(3),
    };
    let mut optimizer = Optimizer::new(config.optimizer, &model.params().tensors());
    let mut history = LossHistory::default();
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch)?;
        if config.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = train_set.select(chunk);
            let loss = train_step(&mut model, &mut optimizer, &batch, lr, &mut dropout_rng)?;
            weighted += loss * chunk.len() as f64;
        }
        let train_loss = weighted / n as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_loss,
            });
        }
        let val_loss = val_set.map(|v| model.eval_loss(v)).transpose()?;
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });
        if let (Some(patience), Some(v)) = (config.early_stopping_patience, val_loss) {
            if v < best_val {
                best_val = v;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fit_schema, generate_base_sales, EmbedDims, FeatureConfig, SynthConfig};

    fn small_model_config() -> ModelConfig {
        ModelConfig {
            embed_dims: EmbedDims { store: 4, customers: 4 },
            input_block_width: 16,
            main_block_widths: vec![16, 8],
            trend_block_width: 8,
            dropout_p: 0.0,
            trend_block_enabled: true,
        }
    }

    fn data(n_stores: usize, n_days: usize, seed: u64) -> (FeatureSchema, EncodedBatch) {
        let cfg = SynthConfig {
            n_stores,
            n_days,
            seed,
            ..Default::default()
        };
        let rows = generate_base_sales(&cfg, &mut RngState::new(seed)).unwrap();
        let schema = fit_schema(&rows, &EmbedDims { store: 4, customers: 4 }, &FeatureConfig::default()).unwrap();
        let batch = schema.encode_batch(&rows);
        (schema, batch)
    }

    #[test]
    fn constant_schedule() {
        let c = TrainConfig {
            schedule: Schedule::Constant,
            ..Default::default()
        };
        assert!((0..c.epochs).all(|e| lr_at(&c, e).unwrap() == c.base_lr));
    }

    #[test]
    fn step_decay_schedule() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 0).unwrap(), 1e-3);
        assert_eq!(lr_at(&c, 19).unwrap(), 1e-3);
        assert_eq!(lr_at(&c, 20).unwrap(), 5e-4);
        assert!((lr_at(&c, 40).unwrap() - 2.5e-4).abs() < 1e-18);
        assert!(lr_at(&c, 60).is_err());
    }

    #[test]
    fn plain_sgd_step() {
        let mut p = Tensor::column(vec![0.0]);
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.0 }, &[&p]);
        let mut g = vec![vec![1.0]];
        opt.step(&mut [&mut p], &mut g, 0.1).unwrap();
        assert_eq!(p.data(), &[-0.1]);
        assert_eq!(g, vec![vec![0.0]]);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let mut p = Tensor::column(vec![0.0]);
        let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.5 }, &[&p]);
        opt.step(&mut [&mut p], &mut [vec![1.0]], 0.1).unwrap();
        opt.step(&mut [&mut p], &mut [vec![1.0]], 0.1).unwrap();
        // v1 = 1, v2 = 1.5
        assert!((p.data()[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr_against_gradient() {
        let grads = [3.0, -0.02, 1e-3];
        let mut p = Tensor::column(vec![1.0, 1.0, 1.0]);
        let mut opt = Optimizer::new(OptimizerKind::default(), &[&p]);
        let lr = 0.01;
        opt.step(&mut [&mut p], &mut [grads.to_vec()], lr).unwrap();
        for (x, g) in p.data().iter().zip(grads) {
            // m̂ = g, v̂ = g², so the step is lr·g / (|g| + ε).
            let expected = 1.0 - lr * g / (g.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-15, "{x} vs {expected}");
            assert!(((1.0 - x) - lr * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [OptimizerKind::default(), OptimizerKind::SgdMomentum { momentum: 0.9 }] {
            let mut p = Tensor::column(vec![0.3, -2.0]);
            let before = p.clone();
            let mut opt = Optimizer::new(kind, &[&p]);
            opt.step(&mut [&mut p], &mut [vec![0.0, 0.0]], 0.1).unwrap();
            assert_eq!(p, before);
        }
    }

    #[test]
    fn step_rejects_mismatched_shapes() {
        let mut p = Tensor::column(vec![0.0, 0.0]);
        let mut opt = Optimizer::new(OptimizerKind::default(), &[&p]);
        assert!(opt.step(&mut [&mut p], &mut [vec![1.0]], 0.1).is_err());
        assert!(opt.step(&mut [], &mut [], 0.1).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                base_lr: 0.0,
                ..Default::default()
            },
            TrainConfig {
                schedule: Schedule::StepDecay { factor: 0.5, period: 0 },
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn one_epoch_gives_one_history_row() {
        let (schema, batch) = data(2, 20, 0);
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let (_, h) = train(&small_model_config(), &schema, &batch, Some(&batch), &cfg).unwrap();
        assert_eq!(h.len(), 1);
        assert!(h.epochs[0].val_loss.is_some());
    }

    #[test]
    fn history_lr_follows_schedule_and_val_is_eval_mode() {
        let (schema, batch) = data(2, 30, 1);
        let val = batch.select(&[0, 1, 2, 3, 4]);
        let mc = ModelConfig {
            dropout_p: 0.3,
            ..small_model_config()
        };
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            schedule: Schedule::StepDecay { factor: 0.5, period: 2 },
            ..Default::default()
        };
        let (model, h) = train(&mc, &schema, &batch, Some(&val), &cfg).unwrap();
        for e in &h.epochs {
            assert_eq!(e.lr, lr_at(&cfg, e.epoch).unwrap());
        }
        // With dropout active, only an eval-mode pass reproduces the
        // recorded validation loss.
        assert_eq!(h.last().unwrap().val_loss, Some(model.eval_loss(&val).unwrap()));
    }

    #[test]
    fn same_seed_same_parameters() {
        let (schema, batch) = data(3, 20, 2);
        let mc = ModelConfig {
            dropout_p: 0.2,
            ..small_model_config()
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 17,
            ..Default::default()
        };
        let (a, ha) = train(&mc, &schema, &batch, None, &cfg).unwrap();
        let (b, hb) = train(&mc, &schema, &batch, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let (c, _) = train(&mc, &schema, &batch, None, &TrainConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_small_step_reduces_batch_loss() {
        let (schema, batch) = data(3, 30, 3);
        for seed in 0..10 {
            let mut model = Model::new(small_model_config(), &schema, seed).unwrap();
            let before = model.eval_loss(&batch).unwrap();
            let mut opt = Optimizer::new(OptimizerKind::SgdMomentum { momentum: 0.0 }, &model.params().tensors());
            train_step(&mut model, &mut opt, &batch, 1e-3, &mut ForwardRng::new(seed)).unwrap();
            let after = model.eval_loss(&batch).unwrap();
            assert!(before - after > 0.0, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn overfits_small_sample() {
        let (schema, batch) = data(4, 50, 4);
        assert_eq!(batch.len(), 200);
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 64,
            schedule: Schedule::Constant,
            base_lr: 3e-3,
            ..Default::default()
        };
        let (_, h) = train(&small_model_config(), &schema, &batch, None, &cfg).unwrap();
        let first = h.first().unwrap().train_loss;
        let last = h.last().unwrap().train_loss;
        assert!(last < 0.01 * first, "{first} -> {last}");
    }

    #[test]
    fn divergence_names_the_epoch() {
        let (schema, batch) = data(2, 20, 5);
        let cfg = TrainConfig {
            epochs: 5,
            base_lr: 1e300,
            optimizer: OptimizerKind::SgdMomentum { momentum: 0.0 },
            ..Default::default()
        };
        match train(&small_model_config(), &schema, &batch, None, &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn early_stopping_truncates_history() {
        let (schema, batch) = data(2, 20, 6);
        // Fitting the training target drives the mirrored target away.
        let mut val = batch.clone();
        val.target.data_mut().iter_mut().for_each(|y| *y = -*y);
        let cfg = TrainConfig {
            epochs: 50,
            base_lr: 1e-2,
            early_stopping_patience: Some(2),
            ..Default::default()
        };
        let (_, h) = train(&small_model_config(), &schema, &batch, Some(&val), &cfg).unwrap();
        assert!(h.len() < 50);
    }
}
