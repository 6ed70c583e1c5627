//! Run configuration read from TOML.
//!
//! ```toml
//! out_dir = "out"
//!
//! [data]
//! source = "synth"          # or "csv" with `path = "sales.csv"`
//! n_stores = 50
//! n_days = 720
//! seed = 0
//!
//! [trends]
//! mode = "random"           # "none", "random", "manifest" or "explicit"
//! seed = 0
//! [trends.params]
//! slope_min = -0.8
//! slope_max = 0.8
//!
//! [split]
//! validation_days = 120     # or boundary = "2014-08-24"
//!
//! [features]
//! customers_numeric = false
//!
//! [model]
//! dropout_p = 0.2
//!
//! [train]
//! epochs = 60
//! schedule = { kind = "step-decay", factor = 0.5, period = 20 }
//!
//! [eval]
//! importance_repeats = 5
//! ```
//!
//! Every section is optional; omitted fields take their defaults.

use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, RandomTrends, SalesRecord, SynthConfig, TrendSpec};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthConfig),
    Csv { path: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        Self::Synth(SynthConfig::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TrendSource {
    /// Sales are used as loaded or generated.
    #[default]
    None,
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: RandomTrends,
    },
    /// A manifest CSV as written by `synth`.
    Manifest {
        path: PathBuf,
    },
    Explicit(TrendSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// First validation date. Overrides `validation_days` when set.
    pub boundary: Option<NaiveDate>,
    /// Length of the trailing validation window.
    pub validation_days: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            boundary: None,
            validation_days: 120,
        }
    }
}

impl SplitConfig {
    /// The first validation date for `records`.
    pub fn boundary_for(&self, records: &[SalesRecord]) -> Result<NaiveDate> {
        if let Some(b) = self.boundary {
            return Ok(b);
        }
        let last = records.iter().map(|r| r.date).max().ok_or(Error::EmptyBatch)?;
        if self.validation_days == 0 {
            return Err(Error::Config("validation_days must be at least 1".into()));
        }
        last.checked_sub_days(Days::new(self.validation_days - 1))
            .ok_or_else(|| Error::Split("validation window reaches before the calendar".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub importance_repeats: usize,
    /// Fits `actual ≈ a·pred + b` on the validation predictions.
    pub bias_correction: bool,
    pub histogram_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            importance_repeats: 5,
            bias_correction: false,
            histogram_bins: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub data: DataSource,
    pub trends: TrendSource,
    pub split: SplitConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            data: DataSource::default(),
            trends: TrendSource::default(),
            split: SplitConfig::default(),
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub split: Option<NaiveDate>,
    pub no_trend_block: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; relative data and manifest paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { path } = &mut cfg.data {
            resolve(path);
        }
        if let TrendSource::Manifest { path } = &mut cfg.trends {
            resolve(path);
        }
        Ok(cfg)
    }

    /// `--seed` reseeds synthesis, trend drawing and training together.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            if let DataSource::Synth(s) = &mut self.data {
                s.seed = seed;
            }
            if let TrendSource::Random { seed: s, .. } = &mut self.trends {
                *s = seed;
            }
            self.train.seed = seed;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir.clone_from(out);
        }
        if let Some(b) = o.split {
            self.split.boundary = Some(b);
        }
        if o.no_trend_block {
            self.model.trend_block_enabled = false;
        }
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        match &self.data {
            DataSource::Synth(s) => {
                if s.n_stores == 0 || s.n_days < 14 {
                    return Err(Error::Config("synth needs n_stores ≥ 1 and n_days ≥ 14".into()));
                }
                if self.features.noise_feature && !s.noise_column {
                    return Err(Error::Config("noise_feature needs data.noise_column".into()));
                }
            }
            DataSource::Csv { path } => {
                if !path.is_file() {
                    return Err(Error::Config(format!("data file {} not found", path.display())));
                }
            }
        }
        match &self.trends {
            TrendSource::None => {}
            TrendSource::Random { params, .. } => {
                if params.segments == 0
                    || !(params.slope_min <= params.slope_max)
                    || !(params.offset_min <= params.offset_max)
                {
                    return Err(Error::Config(
                        "random trends need segments ≥ 1 and ordered ranges".into(),
                    ));
                }
            }
            TrendSource::Manifest { path } => {
                if !path.is_file() {
                    return Err(Error::Config(format!("trend manifest {} not found", path.display())));
                }
            }
            TrendSource::Explicit(spec) => spec.validate().map_err(|e| Error::Config(e.to_string()))?,
        }
        if self.split.boundary.is_none() && self.split.validation_days == 0 {
            return Err(Error::Config("validation_days must be at least 1".into()));
        }
        if self.eval.importance_repeats == 0 || self.eval.histogram_bins == 0 {
            return Err(Error::Config(
                "importance_repeats and histogram_bins must be at least 1".into(),
            ));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("out_dir is empty".into()));
        }
        Ok(())
    }
}
