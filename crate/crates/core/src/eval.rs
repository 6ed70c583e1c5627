//! Scoring, per-store breakdowns, the with/without-trend ablation and
//! permutation feature importance.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{mean_std, EncodedBatch, Feature, FeatureSchema, SalesRecord};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::rng::RngState;
use crate::train::{train, LossHistory, TrainConfig};

/// Root-mean-square error in sales units.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::dim("rmse", &[pred.len()], &[actual.len()]));
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// [`rmse`] within each distinct label.
pub fn rmse_per_group<S: AsRef<str>>(pred: &[f64], actual: &[f64], groups: &[S]) -> Result<BTreeMap<String, f64>> {
    if pred.len() != actual.len() || pred.len() != groups.len() {
        return Err(Error::dim(
            "rmse_per_group",
            &[pred.len(), actual.len()],
            &[groups.len()],
        ));
    }
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ((p, a), g) in pred.iter().zip(actual).zip(groups) {
        let e = acc.entry(g.as_ref()).or_default();
        e.0 += (p - a) * (p - a);
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(g, (sse, n))| (g.to_string(), (sse / n as f64).sqrt()))
        .collect())
}

/// Least-squares `actual ≈ a·pred + b`.
pub fn bias_correct_linear(pred: &[f64], actual: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != actual.len() {
        return Err(Error::dim("bias_correct_linear", &[pred.len()], &[actual.len()]));
    }
    if pred.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let (mp, _) = mean_std(pred.iter().copied());
    let (ma, _) = mean_std(actual.iter().copied());
    let sxx: f64 = pred.iter().map(|p| (p - mp) * (p - mp)).sum();
    let sxy: f64 = pred.iter().zip(actual).map(|(p, a)| (p - mp) * (a - ma)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let a = sxy / sxx;
    Ok((a, ma - a * mp))
}

/// Permutation importance of one raw feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: Feature,
    /// Mean of `deltas`.
    pub delta_rmse: f64,
    /// Permuted minus intact RMSE, one per repeat.
    pub deltas: Vec<f64>,
}

impl Importance {
    /// Population standard deviation of the per-repeat deltas.
    pub fn spread(&self) -> f64 {
        mean_std(self.deltas.iter().copied()).1
    }
}

/// For every raw feature the schema reads: shuffle that field across
/// `records`, re-encode, re-score, and average `permuted − intact` RMSE
/// over `k` repeats. Each feature draws from its own fork of `seed`.
/// Sorted by decreasing importance.
pub fn permutation_importance(
    model: &Model,
    schema: &FeatureSchema,
    records: &[SalesRecord],
    k: usize,
    seed: u64,
) -> Result<Vec<Importance>> {
    if k == 0 {
        return Err(Error::Parameter("permutation repeats must be at least 1".into()));
    }
    let actual: Vec<f64> = records.iter().map(|r| r.sales).collect();
    let baseline = rmse(&model.predict(&schema.encode_batch(records), schema)?, &actual)?;
    let root = RngState::new(seed);
    let mut out = Vec::new();
    for feature in schema.features() {
        let stream = Feature::ALL.iter().position(|f| *f == feature).expect("listed") as u64;
        let mut rng = root.fork(100 + stream);
        let mut deltas = Vec::with_capacity(k);
        let mut permuted = records.to_vec();
        for _ in 0..k {
            let perm = rng.permutation(records.len());
            for (dst, &src) in permuted.iter_mut().zip(&perm) {
                feature.copy_value(dst, &records[src]);
            }
            let pred = model.predict(&schema.encode_batch(&permuted), schema)?;
            deltas.push(rmse(&pred, &actual)? - baseline);
        }
        let (delta_rmse, _) = mean_std(deltas.iter().copied());
        out.push(Importance {
            feature,
            delta_rmse,
            deltas,
        });
    }
    out.sort_by(|a, b| b.delta_rmse.total_cmp(&a.delta_rmse));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub date: NaiveDate,
    pub store: String,
    pub actual: f64,
    pub pred: f64,
    pub pred_trend: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreScore {
    pub rmse: f64,
    pub rmse_trend: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_overall: f64,
    /// Present when a trend model was scored alongside.
    pub rmse_trend: Option<f64>,
    pub per_store: BTreeMap<String, StoreScore>,
    pub series: Vec<SeriesRow>,
    pub importances: Vec<Importance>,
    pub bias_fit: Option<(f64, f64)>,
}

/// Scores `model` (and optionally `trend_model`) on `records`.
pub fn evaluate(
    model: &Model,
    trend_model: Option<&Model>,
    schema: &FeatureSchema,
    records: &[SalesRecord],
) -> Result<EvalReport> {
    let batch = schema.encode_batch(records);
    let actual: Vec<f64> = records.iter().map(|r| r.sales).collect();
    let stores: Vec<&str> = records.iter().map(|r| r.store.as_str()).collect();
    let pred = model.predict(&batch, schema)?;
    let pred_trend = trend_model.map(|m| m.predict(&batch, schema)).transpose()?;

    let base_groups = rmse_per_group(&pred, &actual, &stores)?;
    let trend_groups = pred_trend
        .as_ref()
        .map(|p| rmse_per_group(p, &actual, &stores))
        .transpose()?;
    let per_store = base_groups
        .into_iter()
        .map(|(store, rmse)| {
            let rmse_trend = trend_groups.as_ref().map(|g| g[&store]);
            (store, StoreScore { rmse, rmse_trend })
        })
        .collect();
    let series = records
        .iter()
        .enumerate()
        .map(|(i, r)| SeriesRow {
            date: r.date,
            store: r.store.clone(),
            actual: r.sales,
            pred: pred[i],
            pred_trend: pred_trend.as_ref().map(|p| p[i]),
        })
        .collect();
    Ok(EvalReport {
        rmse_overall: rmse(&pred, &actual)?,
        rmse_trend: pred_trend.as_ref().map(|p| rmse(p, &actual)).transpose()?,
        per_store,
        series,
        importances: Vec::new(),
        bias_fit: None,
    })
}

impl EvalReport {
    /// The score of the trend model when present, otherwise the single
    /// model's.
    pub fn headline(&self) -> f64 {
        self.rmse_trend.unwrap_or(self.rmse_overall)
    }

    /// `model,rmse`.
    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["model", "rmse"])?;
        w.write_record(["pred".to_string(), self.rmse_overall.to_string()])?;
        if let Some(t) = self.rmse_trend {
            w.write_record(["pred_trend".to_string(), t.to_string()])?;
        }
        if let Some((a, b)) = self.bias_fit {
            let corrected: Vec<f64> = self
                .series
                .iter()
                .map(|s| a * s.pred_trend.unwrap_or(s.pred) + b)
                .collect();
            let actual: Vec<f64> = self.series.iter().map(|s| s.actual).collect();
            w.write_record(["pred_corrected".to_string(), rmse(&corrected, &actual)?.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `store,rmse[,rmse_trend]`.
    pub fn write_per_store(&self, path: impl AsRef<Path>) -> Result<()> {
        let paired = self.rmse_trend.is_some();
        let mut w = csv::Writer::from_path(path.as_ref())?;
        if paired {
            w.write_record(["store", "rmse", "rmse_trend"])?;
        } else {
            w.write_record(["store", "rmse"])?;
        }
        for (store, s) in &self.per_store {
            let mut row = vec![store.clone(), s.rmse.to_string()];
            if let Some(t) = s.rmse_trend {
                row.push(t.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `date,store,actual,pred[,pred_trend]`.
    pub fn write_series(&self, path: impl AsRef<Path>) -> Result<()> {
        let paired = self.rmse_trend.is_some();
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["date", "store", "actual", "pred"];
        if paired {
            header.push("pred_trend");
        }
        w.write_record(&header)?;
        for s in &self.series {
            let mut row = vec![
                s.date.format("%Y-%m-%d").to_string(),
                s.store.clone(),
                s.actual.to_string(),
                s.pred.to_string(),
            ];
            if let Some(t) = s.pred_trend {
                row.push(t.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `feature,delta_rmse`, most important first.
    pub fn write_importance(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["feature", "delta_rmse"])?;
        for imp in &self.importances {
            w.write_record([imp.feature.name().to_string(), imp.delta_rmse.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Twin models from one ablation run.
#[derive(Clone, Debug)]
pub struct Ablation {
    pub baseline: Model,
    pub trend: Model,
    pub baseline_history: LossHistory,
    pub trend_history: LossHistory,
    pub report: EvalReport,
}

/// Trains the model without and with the trend block from the same seed
/// and scores both on `val`.
pub fn ablation_run(
    schema: &FeatureSchema,
    train_records: &[SalesRecord],
    val_records: &[SalesRecord],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<Ablation> {
    let train_set = schema.encode_batch(train_records);
    let val_set = schema.encode_batch(val_records);
    let (baseline, baseline_history) = train_variant(schema, &train_set, &val_set, model_config, train_config, false)?;
    let (trend, trend_history) = train_variant(schema, &train_set, &val_set, model_config, train_config, true)?;
    let report = evaluate(&baseline, Some(&trend), schema, val_records)?;
    Ok(Ablation {
        baseline,
        trend,
        baseline_history,
        trend_history,
        report,
    })
}

fn train_variant(
    schema: &FeatureSchema,
    train_set: &EncodedBatch,
    val_set: &EncodedBatch,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    trend_block_enabled: bool,
) -> Result<(Model, LossHistory)> {
    let config = ModelConfig {
        trend_block_enabled,
        ..model_config.clone()
    };
    train(&config, schema, train_set, Some(val_set), train_config)
}
