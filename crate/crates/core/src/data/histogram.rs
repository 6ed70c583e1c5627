use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub center: f64,
    pub width: f64,
    pub density: f64,
}

/// Equal-width density histogram over `[min, max]`, normalized so that
/// `Σ density · width = 1`. A degenerate range gets unit-width bins
/// centered on the single value.
pub fn histogram_export(values: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>> {
    if values.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if n_bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, width) = if max > min {
        (min, (max - min) / n_bins as f64)
    } else {
        (min - 0.5 * n_bins as f64, 1.0)
    };
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let norm = values.len() as f64 * width;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| HistogramBin {
            center: lo + (k as f64 + 0.5) * width,
            width,
            density: c as f64 / norm,
        })
        .collect())
}

/// `bin_center,density` CSV.
pub fn write_histogram_csv(path: impl AsRef<Path>, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["bin_center", "density"])?;
    for b in bins {
        w.write_record([b.center.to_string(), b.density.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
