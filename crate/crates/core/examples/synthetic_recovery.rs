//! End to end on synthetic data: generate three years plus the 2020 windows,
//! train the reference network and OLS baselines, then check that the
//! injected lockdown premium shows up in the out-of-sample errors.
//!
//! cargo run --release --example synthetic_recovery

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use redispatch::eval::{summarize_windows, HourPrediction, NamedWindow};
use redispatch::features::{build_design, DesignMatrix, FeatureSpec};
use redispatch::linreg::fit_ols;
use redispatch::mlp::{train, MlpConfig};
use redispatch::net_demand::build_panel;
use redispatch::splits::{make_split, Fold, SplitPlan};
use redispatch::synth::{generate, GeneratorConfig};

fn hours(design: &DesignMatrix, predicted: &[f64]) -> Vec<HourPrediction> {
    (0..design.y.len())
        .map(|i| HourPrediction { timestamp: design.timestamps[i], date: design.dates[i], actual: design.y[i], predicted: predicted[i] })
        .collect()
}

fn main() -> redispatch::Result<()> {
    let data = generate(&GeneratorConfig::default())?;
    let panel = build_panel(&data.dataset)?;
    let split = make_split(SplitPlan::default_in_sample(), 0.7, 42)?;
    let windows = [
        NamedWindow::new("pre_lockdown", split.oos_pre_lockdown),
        NamedWindow::new("lockdown", split.oos_lockdown),
    ];

    let design = build_design(&panel, &FeatureSpec::preferred(), &split)?;
    let model = train(&design, &MlpConfig { seed: 42, ..MlpConfig::reference() })?;
    println!("network: {} epochs, best epoch {}", model.epochs_run, model.best_epoch);
    let report = summarize_windows(&hours(&design, &model.predict(&design)?), &windows, "pre_lockdown")?;
    for w in &report.windows {
        println!(
            "  {:<13} rmse {:>9.0}  actual/predicted {:+.3}  wilcoxon p {:.4}",
            w.name,
            w.rmse,
            w.ratio_actual_over_predicted,
            w.wilcoxon.as_ref().map_or(f64::NAN, |t| t.p_value),
        );
    }

    // Degree 2 and 3 are fitted on a 2,000-row subsample, where the cubic
    // basis (817 columns) overfits.
    let mut fit_rows = design.rows_in(&[Fold::Train, Fold::Validation]);
    fit_rows.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    for degree in 1..=3u8 {
        let d = build_design(&panel, &FeatureSpec::polynomial(degree), &split)?;
        let rows = if degree == 1 { &fit_rows[..] } else { &fit_rows[..2000] };
        let ols = fit_ols(&d, rows)?;
        let rep = summarize_windows(&hours(&d, &ols.predict(&d)?), &windows, "pre_lockdown")?;
        println!("ols degree {degree}: pre-lockdown rmse {:.0} from {} rows", rep.windows[0].rmse, rows.len());
    }
    Ok(())
}
