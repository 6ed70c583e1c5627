//! Store-day sales records: ingestion, synthesis, trend injection, date
//! splitting and feature encoding.

mod csv_io;
mod histogram;
mod schema;
mod split;
mod synth;
mod trends;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

pub use csv_io::{load_csv, write_csv};
pub use histogram::{histogram_export, write_histogram_csv, HistogramBin};
pub use schema::{
    fit_schema, EmbedDims, EncodedBatch, FeatureConfig, FeatureSchema, NumericColumn, OneHotLayout, Standardizer,
    Vocabulary,
};
pub use split::split_by_date;
pub use synth::{generate_base_sales, SynthConfig};
pub use trends::{inject_trends, RandomTrends, TrendSegment, TrendSpec};

/// One store-day observation.
#[derive(Clone, Debug, PartialEq)]
pub struct SalesRecord {
    pub date: NaiveDate,
    pub store: String,
    pub customers: u32,
    pub store_type: String,
    pub assortment: String,
    pub state_holiday: String,
    pub school_holiday: bool,
    /// Meters to the nearest competitor; `None` when not reported.
    pub competition_distance: Option<f64>,
    /// 1–12, derived from `date`.
    pub month: u32,
    /// 0 = Monday … 6 = Sunday, derived from `date`.
    pub weekday: u32,
    /// Index of the active trend segment.
    pub trend_type: u32,
    pub sales: f64,
    /// Optional irrelevant column used to calibrate feature importances.
    pub noise: Option<f64>,
}

impl SalesRecord {
    /// Record with calendar fields derived from `date` and trend type 0.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        date: NaiveDate,
        store: impl Into<String>,
        customers: u32,
        store_type: impl Into<String>,
        assortment: impl Into<String>,
        state_holiday: impl Into<String>,
        school_holiday: bool,
        competition_distance: Option<f64>,
        sales: f64,
    ) -> Self {
        Self {
            date,
            store: store.into(),
            customers,
            store_type: store_type.into(),
            assortment: assortment.into(),
            state_holiday: state_holiday.into(),
            school_holiday,
            competition_distance,
            month: date.month(),
            weekday: date.weekday().num_days_from_monday(),
            trend_type: 0,
            sales,
            noise: None,
        }
    }
}

/// Raw input columns the model sees, in the order used for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Month,
    Weekday,
    TrendType,
    Store,
    Customers,
    StoreType,
    Assortment,
    StateHoliday,
    SchoolHoliday,
    CompetitionDistance,
    Noise,
}

impl Feature {
    pub const ALL: [Feature; 11] = [
        Feature::Month,
        Feature::Weekday,
        Feature::TrendType,
        Feature::Store,
        Feature::Customers,
        Feature::StoreType,
        Feature::Assortment,
        Feature::StateHoliday,
        Feature::SchoolHoliday,
        Feature::CompetitionDistance,
        Feature::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Month => "month",
            Feature::Weekday => "weekday",
            Feature::TrendType => "trendtype",
            Feature::Store => "Store",
            Feature::Customers => "Customers",
            Feature::StoreType => "StoreType",
            Feature::Assortment => "Assortment",
            Feature::StateHoliday => "StateHoliday",
            Feature::SchoolHoliday => "SchoolHoliday",
            Feature::CompetitionDistance => "CompetitionDistance",
            Feature::Noise => "Noise",
        }
    }

    /// Categorical token of this feature for `r`. Numeric features render
    /// their value.
    pub fn token(self, r: &SalesRecord) -> String {
        match self {
            Feature::Month => r.month.to_string(),
            Feature::Weekday => r.weekday.to_string(),
            Feature::TrendType => r.trend_type.to_string(),
            Feature::Store => r.store.clone(),
            Feature::Customers => r.customers.to_string(),
            Feature::StoreType => r.store_type.clone(),
            Feature::Assortment => r.assortment.clone(),
            Feature::StateHoliday => r.state_holiday.clone(),
            Feature::SchoolHoliday => u8::from(r.school_holiday).to_string(),
            Feature::CompetitionDistance => r.competition_distance.map_or_else(String::new, |d| d.to_string()),
            Feature::Noise => r.noise.map_or_else(String::new, |d| d.to_string()),
        }
    }

    /// Overwrites this feature's field in `dst` with the one from `src`.
    pub fn copy_value(self, dst: &mut SalesRecord, src: &SalesRecord) {
        match self {
            Feature::Month => dst.month = src.month,
            Feature::Weekday => dst.weekday = src.weekday,
            Feature::TrendType => dst.trend_type = src.trend_type,
            Feature::Store => dst.store.clone_from(&src.store),
            Feature::Customers => dst.customers = src.customers,
            Feature::StoreType => dst.store_type.clone_from(&src.store_type),
            Feature::Assortment => dst.assortment.clone_from(&src.assortment),
            Feature::StateHoliday => dst.state_holiday.clone_from(&src.state_holiday),
            Feature::SchoolHoliday => dst.school_holiday = src.school_holiday,
            Feature::CompetitionDistance => dst.competition_distance = src.competition_distance,
            Feature::Noise => dst.noise = src.noise,
        }
    }
}

/// Distinct store ids in first-seen order.
pub fn store_ids(records: &[SalesRecord]) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        if seen.insert(r.store.as_str()) {
            out.push(r.store.clone());
        }
    }
    out
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
