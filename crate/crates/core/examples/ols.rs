//! Polynomial least-squares baselines of degree 1 to 3 on synthetic data.
//!
//! cargo run --release --example ols

use redispatch::features::{build_design, FeatureSpec};
use redispatch::linreg::fit_ols;
use redispatch::net_demand::build_panel;
use redispatch::splits::{make_split, DateRange, Fold};
use redispatch::synth::{generate, GeneratorConfig};

fn main() -> redispatch::Result<()> {
    let range = DateRange::ymd((2018, 1, 1), (2018, 12, 31));
    let data = generate(&GeneratorConfig { range, lockdown: vec![], ..GeneratorConfig::default() })?;
    let panel = build_panel(&data.dataset)?;
    let split = make_split(range, 0.7, 3)?;
    for degree in 1..=3u8 {
        let d = build_design(&panel, &FeatureSpec::polynomial(degree), &split)?;
        let model = fit_ols(&d, &d.rows_in(&[Fold::Train]))?;
        let pred = model.predict(&d)?;
        let val = d.rows_in(&[Fold::Validation]);
        let mse = val.iter().map(|&i| (pred[i] - d.y[i]).powi(2)).sum::<f64>() / val.len() as f64;
        println!(
            "degree {degree}: {} columns, rank {}, validation rmse {:.0}",
            d.n_features(),
            model.diagnostics.rank,
            mse.sqrt()
        );
    }
    Ok(())
}
