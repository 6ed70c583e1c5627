//! Sales densities before and after the split for one strongly trended
//! store: the distribution drifts between the two windows.
//!
//! `cargo run --example sales_histograms`

use chrono::Days;
use trendcast::data::{
    generate_base_sales, histogram_export, inject_trends, split_by_date, SynthConfig, TrendSegment, TrendSpec,
};
use trendcast::rng::RngState;

fn bar(density: f64, peak: f64) -> String {
    "#".repeat((40.0 * density / peak).round() as usize)
}

fn main() -> trendcast::Result<()> {
    let synth = SynthConfig {
        n_stores: 3,
        n_days: 720,
        ..Default::default()
    };
    let base = generate_base_sales(&synth, &mut RngState::new(0))?;
    let mut spec = TrendSpec::default();
    spec.stores.insert(
        "1".into(),
        vec![TrendSegment {
            start_fraction: 0.0,
            slope: 0.8,
            intercept_offset: 0.0,
        }],
    );
    let records = inject_trends(&base, &spec)?;
    let (train_rows, val_rows) = split_by_date(&records, synth.start_date + Days::new(600))?;

    for (label, rows) in [("train", &train_rows), ("validation", &val_rows)] {
        let sales: Vec<f64> = rows.iter().filter(|r| r.store == "1").map(|r| r.sales).collect();
        let bins = histogram_export(&sales, 15)?;
        let peak = bins.iter().map(|b| b.density).fold(0.0, f64::max);
        let mean = sales.iter().sum::<f64>() / sales.len() as f64;
        println!("{label}: {} days, mean {mean:.0}", sales.len());
        for b in &bins {
            println!("  {:>8.0} {}", b.center, bar(b.density, peak));
        }
    }
    Ok(())
}
