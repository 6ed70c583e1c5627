//! Piecewise-linear per-store trends added on top of base sales.
//!
//! For a record at fraction `t` of the full timeline (first to last date of
//! the whole record set), with `σ` the store's pre-injection sales standard
//! deviation and the active segment `(slope, offset)`:
//!
//! ```text
//! sales' = sales + slope · t · σ + offset · σ
//! ```
//!
//! The active segment is the last one whose `start_fraction` is at or below
//! `t`, and its index becomes the record's `trend_type`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean_std, SalesRecord};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSegment {
    pub start_fraction: f64,
    /// Store sales standard deviations per unit of timeline fraction.
    pub slope: f64,
    #[serde(default)]
    pub intercept_offset: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    #[serde(default)]
    pub seed: u64,
    /// Segments per store id. Stores without an entry get no trend.
    #[serde(default)]
    pub stores: BTreeMap<String, Vec<TrendSegment>>,
}

/// Parameters for drawing a random [`TrendSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomTrends {
    pub slope_min: f64,
    pub slope_max: f64,
    pub segments: usize,
    pub offset_min: f64,
    pub offset_max: f64,
}

impl Default for RandomTrends {
    fn default() -> Self {
        Self {
            slope_min: -0.8,
            slope_max: 0.8,
            segments: 1,
            offset_min: 0.0,
            offset_max: 0.0,
        }
    }
}

impl TrendSpec {
    /// Draws one trend per store. The first segment starts at 0 with zero
    /// offset; later segment starts are uniform in `[0.15, 0.85]`.
    pub fn random(stores: &[String], params: &RandomTrends, seed: u64) -> Result<Self> {
        if params.segments == 0 {
            return Err(Error::TrendSpec("at least one segment per store".into()));
        }
        if params.slope_min > params.slope_max || params.offset_min > params.offset_max {
            return Err(Error::TrendSpec("empty slope or offset range".into()));
        }
        let mut rng = RngState::new(seed);
        let mut out = BTreeMap::new();
        for store in stores {
            let mut starts: Vec<f64> = (1..params.segments).map(|_| rng.uniform_range(0.15, 0.85)).collect();
            starts.sort_by(f64::total_cmp);
            starts.dedup();
            starts.insert(0, 0.0);
            let segments = starts
                .iter()
                .enumerate()
                .map(|(i, &start_fraction)| {
                    let slope = rng.uniform_range(params.slope_min, params.slope_max);
                    let offset = rng.uniform_range(params.offset_min, params.offset_max);
                    TrendSegment {
                        start_fraction,
                        slope,
                        intercept_offset: if i == 0 { 0.0 } else { offset },
                    }
                })
                .collect();
            out.insert(store.clone(), segments);
        }
        Ok(Self { seed, stores: out })
    }

    pub fn validate(&self) -> Result<()> {
        for (store, segs) in &self.stores {
            let Some(first) = segs.first() else {
                return Err(Error::TrendSpec(format!("store {store}: no segments")));
            };
            if first.start_fraction != 0.0 {
                return Err(Error::TrendSpec(format!(
                    "store {store}: first segment must start at 0"
                )));
            }
            for pair in segs.windows(2) {
                if !(pair[1].start_fraction > pair[0].start_fraction) {
                    return Err(Error::TrendSpec(format!(
                        "store {store}: segment starts must be strictly increasing"
                    )));
                }
            }
            if segs.iter().any(|s| !(0.0..1.0).contains(&s.start_fraction)) {
                return Err(Error::TrendSpec(format!(
                    "store {store}: start fractions must lie in [0, 1)"
                )));
            }
            if segs
                .iter()
                .any(|s| !s.slope.is_finite() || !s.intercept_offset.is_finite())
            {
                return Err(Error::TrendSpec(format!("store {store}: non-finite segment")));
            }
        }
        Ok(())
    }

    /// Active segment index and segment for `store` at fraction `t`.
    pub fn segment_at(&self, store: &str, t: f64) -> Option<(usize, &TrendSegment)> {
        let segs = self.stores.get(store)?;
        segs.iter().enumerate().rev().find(|(_, s)| s.start_fraction <= t)
    }

    /// Manifest CSV: `store,segment,start_fraction,slope,intercept_offset`.
    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["store", "segment", "start_fraction", "slope", "intercept_offset"])?;
        for (store, segs) in &self.stores {
            for (i, s) in segs.iter().enumerate() {
                w.write_record([
                    store.clone(),
                    i.to_string(),
                    s.start_fraction.to_string(),
                    s.slope.to_string(),
                    s.intercept_offset.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let mut stores: BTreeMap<String, Vec<TrendSegment>> = BTreeMap::new();
        for row in r.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                row.get(i).unwrap_or("").parse().map_err(|_| Error::Row {
                    line,
                    message: format!("bad number in column {i}"),
                })
            };
            stores
                .entry(row.get(0).unwrap_or("").to_string())
                .or_default()
                .push(TrendSegment {
                    start_fraction: num(2)?,
                    slope: num(3)?,
                    intercept_offset: num(4)?,
                });
        }
        let spec = Self { seed: 0, stores };
        spec.validate()?;
        Ok(spec)
    }
}

/// Returns trended copies of `records`; the input is left untouched.
pub fn inject_trends(records: &[SalesRecord], spec: &TrendSpec) -> Result<Vec<SalesRecord>> {
    spec.validate()?;
    let Some(first) = records.iter().map(|r| r.date).min() else {
        return Ok(Vec::new());
    };
    let last = records.iter().map(|r| r.date).max().unwrap_or(first);
    let span = (last - first).num_days() as f64;

    let mut per_store: HashMap<&str, Vec<f64>> = HashMap::new();
    for r in records {
        per_store.entry(r.store.as_str()).or_default().push(r.sales);
    }
    let sigma: HashMap<&str, f64> = per_store.into_iter().map(|(k, v)| (k, mean_std(v).1)).collect();

    Ok(records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            let t = if span > 0.0 {
                (r.date - first).num_days() as f64 / span
            } else {
                0.0
            };
            match spec.segment_at(&r.store, t) {
                Some((idx, seg)) => {
                    let s = sigma[r.store.as_str()];
                    out.sales = r.sales + seg.slope * t * s + seg.intercept_offset * s;
                    out.trend_type = idx as u32;
                }
                None => out.trend_type = 0,
            }
            out
        })
        .collect())
}
