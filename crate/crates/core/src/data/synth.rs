//! Synthetic store-day sales shaped like a retail chain's daily ledger.
//!
//! Each store gets a lognormal base level scaled by store type, assortment
//! and competition distance, its own weekday profile and average ticket.
//! Daily sales multiply in yearly seasonality, public and school holidays
//! and Gaussian noise; customer counts are the noisy sales divided by the
//! ticket. No trend is applied here.

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::SalesRecord;
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_stores: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
    /// Relative standard deviation of the daily multiplicative noise.
    pub noise_level: f64,
    /// Share of stores whose competition distance is unreported.
    pub missing_distance_fraction: f64,
    /// Adds a uniform `[0, 1)` column with no influence on sales.
    pub noise_column: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_stores: 50,
            n_days: 720,
            start_date: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(),
            seed: 0,
            noise_level: 0.05,
            missing_distance_fraction: 0.05,
            noise_column: false,
        }
    }
}

const WEEKDAY_PROFILE: [f64; 7] = [1.12, 1.0, 0.96, 0.98, 1.06, 1.2, 0.55];

struct StoreProfile {
    id: String,
    store_type: &'static str,
    assortment: &'static str,
    distance: Option<f64>,
    level: f64,
    weekday: [f64; 7],
    ticket: f64,
}

fn state_holiday(d: NaiveDate) -> &'static str {
    match (d.month(), d.day()) {
        (1, 1) | (5, 1) | (10, 3) | (8, 15) => "a",
        (4, 18) | (4, 21) | (5, 29) => "b",
        (12, 25) | (12, 26) => "c",
        _ => "0",
    }
}

fn school_holiday(d: NaiveDate) -> bool {
    match (d.month(), d.day()) {
        (7, day) => day >= 20,
        (8, _) => true,
        (12, day) => day >= 22,
        (1, day) => day <= 6,
        (3, day) => day >= 28,
        (4, day) => day <= 10,
        (10, day) => day >= 20,
        _ => false,
    }
}

fn seasonal(d: NaiveDate) -> f64 {
    let doy = d.ordinal() as f64;
    let wave = 1.0 + 0.05 * (2.0 * std::f64::consts::PI * (doy - 80.0) / 365.25).sin();
    if d.month() == 12 {
        wave * 1.12
    } else {
        wave
    }
}

fn draw_store(i: usize, cfg: &SynthConfig, rng: &mut RngState) -> StoreProfile {
    let u = rng.uniform();
    let (store_type, type_effect) = match u {
        u if u < 0.5 => ("a", 1.0),
        u if u < 0.55 => ("b", 1.4),
        u if u < 0.7 => ("c", 0.95),
        _ => ("d", 1.05),
    };
    let u = rng.uniform();
    let (assortment, assort_effect) = match u {
        u if u < 0.5 => ("a", 1.0),
        u if u < 0.55 => ("b", 0.9),
        _ => ("c", 1.1),
    };
    let raw_distance = (rng.lognormal(7.5, 1.0) / 10.0).round() * 10.0;
    let distance_effect = (1.0 + 0.03 * (raw_distance.max(10.0) / 1800.0).ln()).clamp(0.85, 1.15);
    let distance = (rng.uniform() >= cfg.missing_distance_fraction).then_some(raw_distance);
    let level = rng.lognormal(5500f64.ln(), 0.35) * type_effect * assort_effect * distance_effect;
    let mut weekday = WEEKDAY_PROFILE;
    for w in &mut weekday {
        *w *= 1.0 + rng.normal(0.0, 0.04);
    }
    StoreProfile {
        id: (i + 1).to_string(),
        store_type,
        assortment,
        distance,
        level,
        weekday,
        ticket: rng.uniform_range(8.0, 12.0),
    }
}

/// Base sales for `n_stores × n_days`, ordered by date then store.
pub fn generate_base_sales(cfg: &SynthConfig, rng: &mut RngState) -> Result<Vec<SalesRecord>> {
    if cfg.n_stores == 0 {
        return Err(Error::Parameter("n_stores must be at least 1".into()));
    }
    if cfg.n_days < 14 {
        return Err(Error::Parameter("n_days must be at least 14".into()));
    }
    if !(cfg.noise_level >= 0.0) || !(0.0..=1.0).contains(&cfg.missing_distance_fraction) {
        return Err(Error::Parameter(
            "noise_level or missing_distance_fraction out of range".into(),
        ));
    }
    let stores: Vec<StoreProfile> = (0..cfg.n_stores).map(|i| draw_store(i, cfg, rng)).collect();
    let mut out = Vec::with_capacity(cfg.n_stores * cfg.n_days);
    for day in 0..cfg.n_days {
        let date = cfg
            .start_date
            .checked_add_days(Days::new(day as u64))
            .ok_or_else(|| Error::Parameter("date range overflows the calendar".into()))?;
        let holiday = state_holiday(date);
        let school = school_holiday(date);
        let calendar = seasonal(date) * if holiday == "0" { 1.0 } else { 0.5 } * if school { 1.05 } else { 1.0 };
        for s in &stores {
            let wd = date.weekday().num_days_from_monday() as usize;
            let expected = s.level * s.weekday[wd] * calendar;
            let sales = (expected * (1.0 + rng.normal(0.0, cfg.noise_level))).max(0.0);
            let sales = (sales * 100.0).round() / 100.0;
            let customers = (sales / s.ticket * (1.0 + rng.normal(0.0, 0.03))).round().max(0.0) as u32;
            let mut r = SalesRecord::new(
                date,
                s.id.clone(),
                customers,
                s.store_type,
                s.assortment,
                holiday,
                school,
                s.distance,
                sales,
            );
            if cfg.noise_column {
                r.noise = Some(rng.uniform());
            }
            out.push(r);
        }
    }
    Ok(out)
}
