//! Train the reference network on one synthetic year and print the
//! validation trace.
//!
//! cargo run --release --example train

use redispatch::features::{build_design, FeatureSpec};
use redispatch::mlp::{parameter_count, train, MlpConfig};
use redispatch::net_demand::build_panel;
use redispatch::splits::{make_split, DateRange};
use redispatch::synth::{generate, GeneratorConfig};

fn main() -> redispatch::Result<()> {
    let year = DateRange::ymd((2018, 1, 1), (2018, 12, 31));
    let data = generate(&GeneratorConfig { range: year, lockdown: vec![], ..GeneratorConfig::default() })?;
    let panel = build_panel(&data.dataset)?;
    let split = make_split(year, 0.7, 42)?;
    let design = build_design(&panel, &FeatureSpec::preferred(), &split)?;
    let cfg = MlpConfig { seed: 42, ..MlpConfig::reference() };
    println!("{} inputs, {} parameters", design.n_features(), parameter_count(design.n_features(), cfg.n1, cfg.n2));
    let model = train(&design, &cfg)?;
    for e in &model.trace {
        println!("epoch {:>3}  train rmse {:>8.0}  validation rmse {:>8.0}", e.epoch, e.train_mse.sqrt(), e.validation_mse.sqrt());
    }
    println!("kept weights from epoch {}", model.best_epoch);
    Ok(())
}
