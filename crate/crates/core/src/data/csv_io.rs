use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use super::SalesRecord;
use crate::error::{Error, Result};

const REQUIRED: [&str; 9] = [
    "Date",
    "Store",
    "Customers",
    "StoreType",
    "Assortment",
    "StateHoliday",
    "SchoolHoliday",
    "CompetitionDistance",
    "Sales",
];

/// Reads store-day records. Header names are matched case-insensitively;
/// `TrendType` and `Noise` columns are optional.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<SalesRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let columns: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_ascii_lowercase(), i))
        .collect();
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|name| !columns.contains_key(&name.to_ascii_lowercase()))
        .map(|name| (*name).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let col = |name: &str| columns.get(&name.to_ascii_lowercase()).copied();
    let idx: Vec<usize> = REQUIRED.iter().map(|n| col(n).unwrap()).collect();
    let trend_col = col("TrendType");
    let noise_col = col("Noise");

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str, value: &str| Error::Row {
            line,
            message: format!("cannot parse {what} from `{value}`"),
        };

        let date = NaiveDate::parse_from_str(cell(idx[0]), "%Y-%m-%d").map_err(|_| bad("Date", cell(idx[0])))?;
        let customers: u32 = cell(idx[2]).parse().map_err(|_| bad("Customers", cell(idx[2])))?;
        let school = match cell(idx[6]).to_ascii_lowercase().as_str() {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(bad("SchoolHoliday", other)),
        };
        let distance = match cell(idx[7]) {
            "" | "NA" | "NaN" | "nan" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("CompetitionDistance", s))?),
        };
        let sales: f64 = cell(idx[8]).parse().map_err(|_| bad("Sales", cell(idx[8])))?;
        if !(sales >= 0.0) || !sales.is_finite() {
            return Err(Error::Row {
                line,
                message: format!("Sales must be a finite non-negative number, got {sales}"),
            });
        }
        let mut record = SalesRecord::new(
            date,
            cell(idx[1]),
            customers,
            cell(idx[3]),
            cell(idx[4]),
            cell(idx[5]),
            school,
            distance,
            sales,
        );
        if let Some(c) = trend_col {
            record.trend_type = cell(c).parse().map_err(|_| bad("TrendType", cell(c)))?;
        }
        if let Some(c) = noise_col {
            record.noise = match cell(c) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("Noise", s))?),
            };
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes records in the layout [`load_csv`] reads. `TrendType` is written
/// when `with_trend_type` is set; `Noise` when any record carries it.
pub fn write_csv(path: impl AsRef<Path>, records: &[SalesRecord], with_trend_type: bool) -> Result<()> {
    let with_noise = records.iter().any(|r| r.noise.is_some());
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = REQUIRED.to_vec();
    if with_trend_type {
        header.push("TrendType");
    }
    if with_noise {
        header.push("Noise");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.date.format("%Y-%m-%d").to_string(),
            r.store.clone(),
            r.customers.to_string(),
            r.store_type.clone(),
            r.assortment.clone(),
            r.state_holiday.clone(),
            u8::from(r.school_holiday).to_string(),
            r.competition_distance.map_or_else(String::new, |d| d.to_string()),
            r.sales.to_string(),
        ];
        if with_trend_type {
            row.push(r.trend_type.to_string());
        }
        if with_noise {
            row.push(r.noise.map_or_else(String::new, |d| d.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
