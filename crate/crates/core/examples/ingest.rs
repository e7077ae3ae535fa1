//! Round trip through the CSV loader: write synthetic files, read them back
//! with validation and gap filling, and build the net-demand panel.
//!
//! cargo run --example ingest

use redispatch::market_data::{load_dataset, write_dataset, IngestConfig, ZoneId};
use redispatch::net_demand::build_panel;
use redispatch::splits::DateRange;
use redispatch::synth::{generate, GeneratorConfig};

fn main() -> redispatch::Result<()> {
    let cfg = GeneratorConfig { range: DateRange::ymd((2019, 1, 1), (2019, 1, 31)), lockdown: vec![], ..GeneratorConfig::default() };
    let data = generate(&cfg)?;
    let dir = std::env::temp_dir().join("redispatch-ingest-example");
    std::fs::create_dir_all(&dir).map_err(|e| redispatch::Error::io("creating temp dir", e))?;
    let (z, n, h) = (dir.join("zonal.csv"), dir.join("national.csv"), dir.join("holidays.txt"));
    write_dataset(&data.dataset, &z, &n, &h)?;

    let ds = load_dataset(&z, &n, &h, &IngestConfig::default())?;
    let panel = build_panel(&ds)?;
    println!("{} hours, {} cells interpolated", panel.len(), ds.report.total_interpolated);
    for zone in ZoneId::ALL {
        println!("  {:<6} mean net demand {:>8.0} MWh", zone.as_str(), panel.zone_mean(zone));
    }
    Ok(())
}
