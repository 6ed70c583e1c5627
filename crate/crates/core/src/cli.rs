//! The `synth`, `train`, `eval`, `hist` and `importance` commands.
//!
//! Each command validates its configuration and reads all inputs before
//! creating the output directory, so a failing run leaves no partial
//! outputs behind.
//!
//! | command      | writes into `out_dir`                                              |
//! |--------------|--------------------------------------------------------------------|
//! | `synth`      | `data.csv`, `trends.csv`                                           |
//! | `train`      | `trend.json` + `history_trend.csv` (or `baseline.*` without block) |
//! | `eval`       | `summary.csv`, `per_store.csv`, `series.csv`, `importance.csv`     |
//! | `hist`       | `hist_<group>_train.csv`, `hist_<group>_val.csv`                   |
//! | `importance` | `importance.csv`                                                   |

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::checkpoint::{load_model, save_model};
use crate::config::{DataSource, RunConfig, TrendSource};
use crate::data::{
    fit_schema, generate_base_sales, histogram_export, inject_trends, load_csv, split_by_date, store_ids, write_csv,
    write_histogram_csv, Feature, FeatureSchema, SalesRecord, TrendSpec,
};
use crate::error::{Error, Result};
use crate::eval::{bias_correct_linear, evaluate, permutation_importance, EvalReport};
use crate::model::Model;
use crate::rng::RngState;
use crate::train::{train, LossHistory};

/// Records after trend injection, split at the configured boundary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub records: Vec<SalesRecord>,
    pub trends: TrendSpec,
    pub boundary: NaiveDate,
    pub train: Vec<SalesRecord>,
    pub val: Vec<SalesRecord>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let base = match &cfg.data {
        DataSource::Synth(s) => generate_base_sales(s, &mut RngState::new(s.seed))?,
        DataSource::Csv { path } => load_csv(path)?,
    };
    let trends = match &cfg.trends {
        TrendSource::None => TrendSpec::default(),
        TrendSource::Random { seed, params } => TrendSpec::random(&store_ids(&base), params, *seed)?,
        TrendSource::Manifest { path } => TrendSpec::read_manifest(path)?,
        TrendSource::Explicit(spec) => spec.clone(),
    };
    let records = if trends.stores.is_empty() {
        base
    } else {
        inject_trends(&base, &trends)?
    };
    let boundary = cfg.split.boundary_for(&records)?;
    let (train, val) = split_by_date(&records, boundary)?;
    Ok(Dataset {
        records,
        trends,
        boundary,
        train,
        val,
    })
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(&cfg.out_dir)
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub data: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
}

/// Generates the configured dataset, injects trends and writes both the
/// records and the trend manifest.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    if !matches!(cfg.data, DataSource::Synth(_)) {
        return Err(Error::Config("synth needs `data.source = \"synth\"`".into()));
    }
    let ds = load_dataset(cfg)?;
    let out = prepare_out(cfg)?;
    let data = out.join("data.csv");
    let manifest = out.join("trends.csv");
    write_csv(&data, &ds.records, true)?;
    ds.trends.write_manifest(&manifest)?;
    Ok(SynthOutput {
        data,
        manifest,
        rows: ds.records.len(),
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub history_path: PathBuf,
    pub model: Model,
    pub schema: FeatureSchema,
    pub history: LossHistory,
}

fn variant(model_trend: bool) -> &'static str {
    if model_trend {
        "trend"
    } else {
        "baseline"
    }
}

/// Fits the schema on the training window, trains, and writes the
/// checkpoint and loss history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let schema = fit_schema(&ds.train, &cfg.model.embed_dims, &cfg.features)?;
    let train_set = schema.encode_batch(&ds.train);
    let val_set = schema.encode_batch(&ds.val);
    let (model, history) = train(&cfg.model, &schema, &train_set, Some(&val_set), &cfg.train)?;

    let out = prepare_out(cfg)?;
    let name = variant(cfg.model.trend_block_enabled);
    let checkpoint = out.join(format!("{name}.json"));
    let history_path = out.join(format!("history_{name}.csv"));
    save_model(&checkpoint, &model, &schema, cfg.train.seed)?;
    history.write_csv(&history_path)?;
    Ok(TrainOutput {
        checkpoint,
        history_path,
        model,
        schema,
        history,
    })
}

/// Explicit checkpoints, or `baseline.json` and `trend.json` from the
/// output directory when none are given.
fn resolve_checkpoints(cfg: &RunConfig, given: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if given.len() > 2 {
        return Err(Error::Config("at most two checkpoints: baseline and trend".into()));
    }
    if !given.is_empty() {
        return Ok(given.to_vec());
    }
    let found: Vec<PathBuf> = ["baseline", "trend"]
        .iter()
        .map(|n| cfg.out_dir.join(format!("{n}.json")))
        .filter(|p| p.is_file())
        .collect();
    if found.is_empty() {
        return Err(Error::Checkpoint(format!(
            "no checkpoint given and none found in {}",
            cfg.out_dir.display()
        )));
    }
    Ok(found)
}

struct Loaded {
    model: Model,
    trend: Option<Model>,
    schema: FeatureSchema,
}

impl Loaded {
    /// The model importances and bias correction are computed for.
    fn primary(&self) -> &Model {
        self.trend.as_ref().unwrap_or(&self.model)
    }
}

fn load_checkpoints(paths: &[PathBuf]) -> Result<Loaded> {
    let (model, schema) = load_model(&paths[0])?;
    let trend = match paths.get(1) {
        Some(p) => {
            let (m, s) = load_model(p)?;
            if s != schema {
                return Err(Error::Checkpoint(format!(
                    "{} and {} were trained with different encodings",
                    paths[0].display(),
                    p.display()
                )));
            }
            Some(m)
        }
        None => None,
    };
    Ok(Loaded { model, trend, schema })
}

fn check_compatible(schema: &FeatureSchema, records: &[SalesRecord]) -> Result<()> {
    if schema.config.noise_feature && records.iter().any(|r| r.noise.is_none()) {
        return Err(Error::MissingColumns(vec![Feature::Noise.name().into()]));
    }
    Ok(())
}

fn filter_store(records: Vec<SalesRecord>, all: &[SalesRecord], store: Option<&str>) -> Result<Vec<SalesRecord>> {
    let Some(id) = store else {
        return Ok(records);
    };
    if !all.iter().any(|r| r.store == id) {
        return Err(Error::UnknownStore(id.into()));
    }
    let kept: Vec<SalesRecord> = records.into_iter().filter(|r| r.store == id).collect();
    if kept.is_empty() {
        return Err(Error::Split(format!("store {id} has no rows in this window")));
    }
    Ok(kept)
}

/// Scores one checkpoint, or a baseline and trend pair, on the
/// validation window and writes the report CSVs.
pub fn cmd_eval(cfg: &RunConfig, checkpoints: &[PathBuf], store: Option<&str>) -> Result<EvalReport> {
    cfg.validate()?;
    let paths = resolve_checkpoints(cfg, checkpoints)?;
    let loaded = load_checkpoints(&paths)?;
    let ds = load_dataset(cfg)?;
    let val = filter_store(ds.val, &ds.records, store)?;
    check_compatible(&loaded.schema, &val)?;

    let mut report = evaluate(&loaded.model, loaded.trend.as_ref(), &loaded.schema, &val)?;
    report.importances = permutation_importance(
        loaded.primary(),
        &loaded.schema,
        &val,
        cfg.eval.importance_repeats,
        cfg.train.seed,
    )?;
    if cfg.eval.bias_correction {
        let pred: Vec<f64> = report.series.iter().map(|s| s.pred_trend.unwrap_or(s.pred)).collect();
        let actual: Vec<f64> = report.series.iter().map(|s| s.actual).collect();
        report.bias_fit = Some(bias_correct_linear(&pred, &actual)?);
    }

    let out = prepare_out(cfg)?;
    report.write_summary(out.join("summary.csv"))?;
    report.write_per_store(out.join("per_store.csv"))?;
    report.write_series(out.join("series.csv"))?;
    report.write_importance(out.join("importance.csv"))?;
    Ok(report)
}

/// Permutation importance alone, for the trend checkpoint when present.
pub fn cmd_importance(cfg: &RunConfig, checkpoint: Option<&Path>, store: Option<&str>) -> Result<EvalReport> {
    cfg.validate()?;
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => resolve_checkpoints(cfg, &[])?.pop().expect("non-empty"),
    };
    let (model, schema) = load_model(&path)?;
    let ds = load_dataset(cfg)?;
    let val = filter_store(ds.val, &ds.records, store)?;
    check_compatible(&schema, &val)?;
    let report = EvalReport {
        importances: permutation_importance(&model, &schema, &val, cfg.eval.importance_repeats, cfg.train.seed)?,
        ..Default::default()
    };
    let out = prepare_out(cfg)?;
    report.write_importance(out.join("importance.csv"))?;
    Ok(report)
}

/// Sales histograms for the training and validation windows, over all
/// stores or a single one.
pub fn cmd_hist(cfg: &RunConfig, store: Option<&str>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let train_rows = filter_store(ds.train, &ds.records, store)?;
    let val_rows = filter_store(ds.val, &ds.records, store)?;
    let sales = |rows: &[SalesRecord]| rows.iter().map(|r| r.sales).collect::<Vec<f64>>();
    let bins = cfg.eval.histogram_bins;
    let train_bins = histogram_export(&sales(&train_rows), bins)?;
    let val_bins = histogram_export(&sales(&val_rows), bins)?;

    let group = store.map_or_else(|| "all".to_string(), |s| format!("store_{s}"));
    let out = prepare_out(cfg)?;
    let train_path = out.join(format!("hist_{group}_train.csv"));
    let val_path = out.join(format!("hist_{group}_val.csv"));
    write_histogram_csv(&train_path, &train_bins)?;
    write_histogram_csv(&val_path, &val_bins)?;
    Ok(vec![train_path, val_path])
}
