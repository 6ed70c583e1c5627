//! Base sales, then per-store linear trends with two segments each.
//!
//! `cargo run --example synthetic_data -- [out_dir]`

use std::path::PathBuf;

use trendcast::data::{generate_base_sales, inject_trends, store_ids, write_csv, RandomTrends, SynthConfig, TrendSpec};
use trendcast::rng::RngState;

fn main() -> trendcast::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/synthetic".into()));
    std::fs::create_dir_all(&out)?;

    let cfg = SynthConfig {
        n_stores: 8,
        n_days: 365,
        ..Default::default()
    };
    let base = generate_base_sales(&cfg, &mut RngState::new(cfg.seed))?;
    let spec = TrendSpec::random(
        &store_ids(&base),
        &RandomTrends {
            segments: 2,
            offset_min: -0.5,
            offset_max: 0.5,
            ..Default::default()
        },
        7,
    )?;
    let trended = inject_trends(&base, &spec)?;

    write_csv(out.join("data.csv"), &trended, true)?;
    spec.write_manifest(out.join("trends.csv"))?;

    println!("{:>5} {:>9} {:>9} {:>8}", "store", "first", "last", "slopes");
    for id in store_ids(&trended) {
        let rows: Vec<_> = trended.iter().filter(|r| r.store == id).collect();
        let mean = |rs: &[&trendcast::data::SalesRecord]| rs.iter().map(|r| r.sales).sum::<f64>() / rs.len() as f64;
        let slopes: Vec<String> = spec.stores[&id].iter().map(|s| format!("{:+.2}", s.slope)).collect();
        println!(
            "{id:>5} {:>9.0} {:>9.0} {:>8}",
            mean(&rows[..30]),
            mean(&rows[rows.len() - 30..]),
            slopes.join(" ")
        );
    }
    println!("wrote {} rows to {}", trended.len(), out.display());
    Ok(())
}
