//! Encoding state fitted on the training period.
//!
//! * `Store` and `Customers` are embedded; vocabulary index 0 is the
//!   out-of-vocabulary slot.
//! * Low-cardinality categoricals are one-hot; unseen tokens encode as an
//!   all-zero row.
//! * Numerics and the sales target are z-scored with population statistics.
//! * Normalized time is `t(d) = days(d − d0) / days(d1 − d0)` over the
//!   training window, so validation dates give `t > 1`.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{mean_std, Feature, SalesRecord};
use crate::autograd::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedDims {
    pub store: usize,
    pub customers: usize,
}

impl Default for EmbedDims {
    fn default() -> Self {
        Self {
            store: 16,
            customers: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Treat `Customers` as a z-scored numeric instead of an embedded token.
    pub customers_numeric: bool,
    /// Also feed normalized time to the network as a numeric input.
    pub time_as_input: bool,
    /// Feed the optional `Noise` column as a numeric input.
    pub noise_feature: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub feature: Feature,
    /// Token to row index; indices start at 1.
    pub index: BTreeMap<String, usize>,
    pub dim: usize,
}

impl Vocabulary {
    /// Table rows, including the out-of-vocabulary row 0.
    pub fn size(&self) -> usize {
        self.index.len() + 1
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneHotLayout {
    pub feature: Feature,
    pub columns: BTreeMap<String, usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub feature: Feature,
    pub stats: Standardizer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub embeddings: Vec<Vocabulary>,
    pub onehots: Vec<OneHotLayout>,
    pub numerics: Vec<NumericColumn>,
    /// Training median used for missing competition distances.
    pub competition_fill: f64,
    pub target: Standardizer,
    pub time_bounds: (NaiveDate, NaiveDate),
    pub config: FeatureConfig,
}

/// Model-ready view of a set of records.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBatch {
    /// Per embedded variable, one row index per record.
    pub embed_indices: Vec<Vec<usize>>,
    pub onehot: Tensor,
    pub numeric: Tensor,
    /// Normalized time, `n × 1`.
    pub time: Tensor,
    /// z-scored sales, `n × 1`.
    pub target: Tensor,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.time.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> EncodedBatch {
        EncodedBatch {
            embed_indices: self
                .embed_indices
                .iter()
                .map(|ix| rows.iter().map(|&r| ix[r]).collect())
                .collect(),
            onehot: self.onehot.select_rows(rows),
            numeric: self.numeric.select_rows(rows),
            time: self.time.select_rows(rows),
            target: self.target.select_rows(rows),
        }
    }
}

const ONEHOT_FEATURES: [Feature; 7] = [
    Feature::StoreType,
    Feature::Assortment,
    Feature::StateHoliday,
    Feature::SchoolHoliday,
    Feature::Month,
    Feature::Weekday,
    Feature::TrendType,
];

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn standardizer(feature: &str, values: impl IntoIterator<Item = f64>) -> Result<Standardizer> {
    let (mean, std) = mean_std(values);
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::ConstantFeature(feature.to_string()));
    }
    Ok(Standardizer { mean, std })
}

/// Fits vocabularies, layouts and statistics on `train` only.
pub fn fit_schema(train: &[SalesRecord], dims: &EmbedDims, config: &FeatureConfig) -> Result<FeatureSchema> {
    if train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if dims.store == 0 || (!config.customers_numeric && dims.customers == 0) {
        return Err(Error::Parameter("embedding widths must be at least 1".into()));
    }

    let vocab = |feature: Feature, dim: usize| {
        let mut tokens: Vec<String> = train.iter().map(|r| feature.token(r)).collect();
        tokens.sort();
        tokens.dedup();
        Vocabulary {
            feature,
            index: tokens.into_iter().enumerate().map(|(i, t)| (t, i + 1)).collect(),
            dim,
        }
    };
    let mut embeddings = vec![vocab(Feature::Store, dims.store)];
    if !config.customers_numeric {
        embeddings.push(vocab(Feature::Customers, dims.customers));
    }

    let mut offset = 0;
    let onehots = ONEHOT_FEATURES
        .iter()
        .map(|&feature| {
            let mut tokens: Vec<String> = train.iter().map(|r| feature.token(r)).collect();
            tokens.sort();
            tokens.dedup();
            let columns = tokens
                .into_iter()
                .map(|t| {
                    offset += 1;
                    (t, offset - 1)
                })
                .collect();
            OneHotLayout { feature, columns }
        })
        .collect();

    let competition_fill = median(train.iter().filter_map(|r| r.competition_distance).collect())
        .ok_or_else(|| Error::ConstantFeature(Feature::CompetitionDistance.name().into()))?;
    let mut numerics = vec![NumericColumn {
        feature: Feature::CompetitionDistance,
        stats: standardizer(
            Feature::CompetitionDistance.name(),
            train.iter().map(|r| r.competition_distance.unwrap_or(competition_fill)),
        )?,
    }];
    if config.customers_numeric {
        numerics.push(NumericColumn {
            feature: Feature::Customers,
            stats: standardizer(Feature::Customers.name(), train.iter().map(|r| r.customers as f64))?,
        });
    }
    if config.noise_feature {
        if train.iter().any(|r| r.noise.is_none()) {
            return Err(Error::MissingColumns(vec![Feature::Noise.name().into()]));
        }
        numerics.push(NumericColumn {
            feature: Feature::Noise,
            stats: standardizer(Feature::Noise.name(), train.iter().filter_map(|r| r.noise))?,
        });
    }

    let target = standardizer("Sales", train.iter().map(|r| r.sales)).map_err(|_| Error::DegenerateTarget)?;

    let d0 = train.iter().map(|r| r.date).min().unwrap();
    let d1 = train.iter().map(|r| r.date).max().unwrap();
    if d1 == d0 {
        return Err(Error::DegenerateWindow);
    }

    Ok(FeatureSchema {
        embeddings,
        onehots,
        numerics,
        competition_fill,
        target,
        time_bounds: (d0, d1),
        config: *config,
    })
}

impl FeatureSchema {
    pub fn onehot_width(&self) -> usize {
        self.onehots.iter().map(|o| o.columns.len()).sum()
    }

    pub fn numeric_width(&self) -> usize {
        self.numerics.len() + usize::from(self.config.time_as_input)
    }

    /// Width of the concatenated network input.
    pub fn input_width(&self) -> usize {
        self.embeddings.iter().map(|e| e.dim).sum::<usize>() + self.onehot_width() + self.numeric_width()
    }

    /// Raw features the encoding reads, in reporting order.
    pub fn features(&self) -> Vec<Feature> {
        Feature::ALL
            .into_iter()
            .filter(|f| {
                self.embeddings.iter().any(|e| e.feature == *f)
                    || self.onehots.iter().any(|o| o.feature == *f)
                    || self.numerics.iter().any(|n| n.feature == *f)
            })
            .collect()
    }

    pub fn time(&self, date: NaiveDate) -> f64 {
        let (d0, d1) = self.time_bounds;
        (date - d0).num_days() as f64 / (d1 - d0).num_days() as f64
    }

    pub fn normalize_target(&self, sales: f64) -> f64 {
        self.target.normalize(sales)
    }

    pub fn denormalize_target(&self, y_norm: f64) -> f64 {
        self.target.denormalize(y_norm)
    }

    fn numeric_value(&self, feature: Feature, r: &SalesRecord) -> Option<f64> {
        match feature {
            Feature::CompetitionDistance => Some(r.competition_distance.unwrap_or(self.competition_fill)),
            Feature::Customers => Some(r.customers as f64),
            Feature::Noise => r.noise,
            _ => None,
        }
    }

    /// Encodes any records; unseen tokens fall back to the OOV rules and
    /// missing numerics to their training mean.
    pub fn encode_batch(&self, records: &[SalesRecord]) -> EncodedBatch {
        let n = records.len();
        let embed_indices = self
            .embeddings
            .iter()
            .map(|v| records.iter().map(|r| v.lookup(&v.feature.token(r))).collect())
            .collect();

        let k = self.onehot_width();
        let mut onehot = vec![0.0; n * k];
        for (i, r) in records.iter().enumerate() {
            for layout in &self.onehots {
                if let Some(&c) = layout.columns.get(&layout.feature.token(r)) {
                    onehot[i * k + c] = 1.0;
                }
            }
        }

        let m = self.numeric_width();
        let mut numeric = Vec::with_capacity(n * m);
        let mut time = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        for r in records {
            let t = self.time(r.date);
            for col in &self.numerics {
                let z = self
                    .numeric_value(col.feature, r)
                    .map_or(0.0, |x| col.stats.normalize(x));
                numeric.push(z);
            }
            if self.config.time_as_input {
                numeric.push(t);
            }
            time.push(t);
            target.push(self.normalize_target(r.sales));
        }

        EncodedBatch {
            embed_indices,
            onehot: Tensor::matrix(n, k, onehot).expect("one-hot layout"),
            numeric: Tensor::matrix(n, m, numeric).expect("numeric layout"),
            time: Tensor::column(time),
            target: Tensor::column(target),
        }
    }
}
