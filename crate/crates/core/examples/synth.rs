//! Generate a short synthetic dataset and write it in the ingest CSV layout.
//!
//! cargo run --example synth -- /tmp/synthetic

use redispatch::market_data::write_dataset;
use redispatch::splits::DateRange;
use redispatch::synth::{generate, GeneratorConfig};

fn main() -> redispatch::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synthetic".into());
    std::fs::create_dir_all(&dir).map_err(|e| redispatch::Error::io("creating output dir", e))?;
    let cfg = GeneratorConfig { range: DateRange::ymd((2019, 1, 1), (2019, 3, 31)), lockdown: vec![], ..GeneratorConfig::default() };
    let data = generate(&cfg)?;
    let dir = std::path::Path::new(&dir);
    write_dataset(&data.dataset, dir.join("zonal.csv"), dir.join("national.csv"), dir.join("holidays.txt"))?;
    let mean = data.truth.noiseless_cost.iter().sum::<f64>() / data.truth.noiseless_cost.len() as f64;
    println!("{} hours written to {}, mean noiseless cost {mean:.0} EUR/h", data.dataset.hours(), dir.display());
    Ok(())
}
