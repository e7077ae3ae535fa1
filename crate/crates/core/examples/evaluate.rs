//! Out-of-sample evaluation of the noiseless cost function on the 2020
//! windows: the lockdown premium is visible and the band is calibrated.
//!
//! cargo run --release --example evaluate

use redispatch::eval::{summarize_windows, NamedWindow};
use redispatch::net_demand::build_panel;
use redispatch::predictor::CostPredictor;
use redispatch::splits::SplitPlan;
use redispatch::synth::{generate, GeneratorConfig, GroundTruthCost};

fn main() -> redispatch::Result<()> {
    let cfg = GeneratorConfig::default();
    let data = generate(&cfg)?;
    let panel = build_panel(&data.dataset)?;
    let hours = GroundTruthCost(cfg.cost).predict_panel(&panel)?;
    let windows = [
        NamedWindow::new("pre_lockdown", SplitPlan::default_pre_lockdown()),
        NamedWindow::new("lockdown", SplitPlan::default_lockdown()),
    ];
    let report = summarize_windows(&hours, &windows, "pre_lockdown")?;
    println!("band: -{:.0} / +{:.0} EUR", report.band.lower, report.band.upper);
    for w in &report.windows {
        println!(
            "{:<13} {} hours, rmse {:.0}, actual/predicted {:+.3}, p {:.3e}, coverage {:.3}",
            w.name,
            w.hours,
            w.rmse,
            w.ratio_actual_over_predicted,
            w.wilcoxon.as_ref().map_or(f64::NAN, |t| t.p_value),
            w.band_coverage
        );
    }
    Ok(())
}
