//! A small Hyperband search (R = 9, eta = 3) over the default space.
//!
//! cargo run --release --example tune

use redispatch::features::{build_design, FeatureSpec};
use redispatch::net_demand::build_panel;
use redispatch::splits::{make_split, DateRange};
use redispatch::synth::{generate, GeneratorConfig};
use redispatch::tuner::{bracket_plan, tune, TunerConfig};

fn main() -> redispatch::Result<()> {
    let range = DateRange::ymd((2018, 1, 1), (2018, 6, 30));
    let data = generate(&GeneratorConfig { range, lockdown: vec![], ..GeneratorConfig::default() })?;
    let panel = build_panel(&data.dataset)?;
    let design = build_design(&panel, &FeatureSpec::preferred(), &make_split(range, 0.7, 1)?)?;

    let cfg = TunerConfig { max_epochs_per_trial: 9, eta: 3, final_max_epochs: 50, seed: 1, ..TunerConfig::default() };
    for b in bracket_plan(cfg.max_epochs_per_trial, cfg.eta)? {
        println!("bracket s={}: (trials, epochs) {:?}", b.s, b.rungs);
    }
    let (result, model) = tune(&design, &cfg)?;
    let c = &result.best_config;
    println!(
        "{} trials, {} epochs; best {} {}x{} lr {:.4} dropout {} (validation rmse {:.0})",
        result.leaderboard.len(),
        result.epochs_allotted(),
        c.activation,
        c.n1,
        c.n2,
        c.learning_rate,
        c.dropout,
        result.best_validation_mse.sqrt()
    );
    println!("retrained for {} epochs", model.epochs_run);
    Ok(())
}
