use chrono::NaiveDate;

use super::SalesRecord;
use crate::error::{Error, Result};

/// Rows dated before `boundary` train; the rest validate. Both sides must
/// be non-empty.
pub fn split_by_date(records: &[SalesRecord], boundary: NaiveDate) -> Result<(Vec<SalesRecord>, Vec<SalesRecord>)> {
    let (Some(first), Some(last)) = (
        records.iter().map(|r| r.date).min(),
        records.iter().map(|r| r.date).max(),
    ) else {
        return Err(Error::Split("no records".into()));
    };
    if boundary <= first || boundary > last {
        return Err(Error::Split(format!(
            "boundary {boundary} must lie in ({first}, {last}]"
        )));
    }
    let (train, validation) = records.iter().cloned().partition(|r| r.date < boundary);
    Ok((train, validation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;

    fn days(n: u64) -> Vec<SalesRecord> {
        let d0 = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        (0..n)
            .map(|i| SalesRecord::new(d0 + Days::new(i), "1", 1, "a", "a", "0", false, None, i as f64))
            .collect()
    }

    #[test]
    fn ten_days_split_at_day_eight() {
        let rows = days(10);
        let (train, val) = split_by_date(&rows, rows[7].date).unwrap();
        assert_eq!((train.len(), val.len()), (7, 3));
    }

    #[test]
    fn boundary_outside_range_is_rejected() {
        let rows = days(10);
        assert!(split_by_date(&rows, rows[9].date + Days::new(1)).is_err());
        assert!(split_by_date(&rows, rows[0].date).is_err());
        assert!(split_by_date(&[], rows[0].date).is_err());
    }

    #[test]
    fn every_valid_boundary_partitions_in_order() {
        let rows = days(30);
        for b in 1..30 {
            let (train, val) = split_by_date(&rows, rows[b].date).unwrap();
            assert_eq!(train.len() + val.len(), rows.len());
            let max_train = train.iter().map(|r| r.date).max().unwrap();
            let min_val = val.iter().map(|r| r.date).min().unwrap();
            assert!(max_train < min_val);
        }
    }
}
