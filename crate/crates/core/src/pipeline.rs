//! The six pipeline stages behind the command-line subcommands. Each reads a
//! [`RunConfig`], writes its artifacts under an output directory and leaves a
//! resolved copy of the config beside them.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{band_coverage, summarize_windows, EvaluationReport, NamedWindow};
use crate::features::build_design;
use crate::linreg::fit_ols;
use crate::market_data::{format_timestamp, load_dataset, write_dataset, MarketDataset};
use crate::mlp::{self, MlpModel};
use crate::net_demand::{build_panel, NetDemandPanel};
use crate::predictor::SavedModel;
use crate::scenarios::{run_scenario, write_table_csv, ScenarioReport};
use crate::splits::{make_split_with_windows, restrict_in_sample, Fold, SplitPlan};
use crate::synth::generate;
use crate::tuner::tune;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const PRE_LOCKDOWN: &str = "pre_lockdown";
pub const LOCKDOWN: &str = "lockdown";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    write_text(&out.join(RESOLVED_CONFIG), &cfg.to_toml()?)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(MarketDataset, NetDemandPanel)> {
    let p = &cfg.paths;
    let ds = load_dataset(&p.zonal, &p.national, &p.holidays, &cfg.ingest_config()?)?;
    for w in &ds.report.warnings {
        log::warn!("{w}");
    }
    let panel = build_panel(&ds)?;
    Ok((ds, panel))
}

pub fn split_plan(cfg: &RunConfig) -> Result<SplitPlan> {
    let s = &cfg.split;
    let plan = make_split_with_windows(s.in_sample, s.ratio, cfg.seed, s.pre_lockdown, s.lockdown)?;
    match s.restrict_year {
        Some(year) => restrict_in_sample(&plan, year),
        None => Ok(plan),
    }
}

pub fn model_path(cfg: &RunConfig, out: &Path) -> PathBuf {
    cfg.paths.model.clone().unwrap_or_else(|| out.join("model.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub panel_rows: usize,
    pub expected_rows: usize,
    pub interpolated_cells: usize,
    pub warnings: usize,
}

pub fn cmd_ingest(cfg: &RunConfig, out: &Path) -> Result<IngestSummary> {
    prepare(cfg, out)?;
    let (ds, panel) = load_inputs(cfg)?;
    panel.write_csv(create(&out.join("panel.csv"))?)?;
    write_json(&out.join("ingest_report.json"), &ds.report)?;
    let summary = IngestSummary {
        panel_rows: panel.len(),
        expected_rows: ds.report.naive_hour_count,
        interpolated_cells: ds.report.total_interpolated,
        warnings: ds.report.warnings.len(),
    };
    log::info!(
        "panel has {} rows ({} expected from the calendar), {} cells interpolated",
        summary.panel_rows,
        summary.expected_rows,
        summary.interpolated_cells
    );
    Ok(summary)
}

fn save_mlp(model: &MlpModel, out: &Path, path: &Path) -> Result<()> {
    SavedModel::Mlp(model.clone()).save(path)?;
    write_text(&out.join("trace.csv"), &model.trace_csv())
}

fn run_tuner(cfg: &RunConfig, panel: &NetDemandPanel, split: &SplitPlan, out: &Path) -> Result<MlpModel> {
    let design = build_design(panel, &cfg.features, split)?;
    let (result, model) = tune(&design, &cfg.tuner_config())?;
    result.write_leaderboard_csv(create(&out.join("leaderboard.csv"))?)?;
    write_text(&out.join("tuner.json"), &result.to_json()?)?;
    write_json(&out.join("best_config.json"), &result.best_config)?;
    log::info!(
        "tuner ran {} trials; best validation MSE {:.4e} ({} {}x{}, lr {:.3e}, dropout {})",
        result.leaderboard.len(),
        result.best_validation_mse,
        result.best_config.activation,
        result.best_config.n1,
        result.best_config.n2,
        result.best_config.learning_rate,
        result.best_config.dropout
    );
    Ok(model)
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<SavedModel> {
    prepare(cfg, out)?;
    let (_, panel) = load_inputs(cfg)?;
    let split = split_plan(cfg)?;
    split.save(&out.join("split.json"))?;
    let path = model_path(cfg, out);
    let saved = match cfg.model.kind {
        ModelKind::Mlp => {
            let design = build_design(&panel, &cfg.features, &split)?;
            let model = mlp::train(&design, &cfg.model.mlp)?;
            log::info!("trained {} epochs, best epoch {}", model.epochs_run, model.best_epoch);
            save_mlp(&model, out, &path)?;
            SavedModel::Mlp(model)
        }
        ModelKind::MlpTuned => {
            let model = run_tuner(cfg, &panel, &split, out)?;
            save_mlp(&model, out, &path)?;
            SavedModel::Mlp(model)
        }
        ModelKind::Ols => {
            let design = build_design(&panel, &cfg.features, &split)?;
            let mut rows = design.rows_in(&[Fold::Train, Fold::Validation]);
            if let Some(max) = cfg.model.ols_max_rows.filter(|m| *m < rows.len()) {
                rows.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
                rows.truncate(max);
                rows.sort_unstable();
            }
            let model = fit_ols(&design, &rows)?;
            model.write_coefficients_csv(create(&out.join("coefficients.csv"))?)?;
            let saved = SavedModel::Ols(model);
            saved.save(&path)?;
            saved
        }
    };
    Ok(saved)
}

pub fn cmd_tune(cfg: &RunConfig, out: &Path) -> Result<MlpModel> {
    prepare(cfg, out)?;
    let (_, panel) = load_inputs(cfg)?;
    let split = split_plan(cfg)?;
    split.save(&out.join("split.json"))?;
    let model = run_tuner(cfg, &panel, &split, out)?;
    save_mlp(&model, out, &model_path(cfg, out))?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationOutput {
    #[serde(flatten)]
    pub report: EvaluationReport,
    /// Share of validation-day actuals inside the band.
    pub validation_band_coverage: f64,
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<EvaluationOutput> {
    prepare(cfg, out)?;
    let model = SavedModel::load(&model_path(cfg, out))?;
    let (_, panel) = load_inputs(cfg)?;
    let split = split_plan(cfg)?;
    let hours = model.predictor().predict_panel(&panel)?;
    let windows = [
        NamedWindow::new(PRE_LOCKDOWN, split.oos_pre_lockdown),
        NamedWindow::new(LOCKDOWN, split.oos_lockdown),
    ];
    let report = summarize_windows(&hours, &windows, PRE_LOCKDOWN)?;
    let validation: Vec<_> = hours.iter().filter(|h| split.fold_of(h.date) == Fold::Validation).copied().collect();
    let validation_band_coverage = band_coverage(&validation, &report.band);

    report.write_hourly_csv(create(&out.join("evaluation_hourly.csv"))?)?;
    report.write_daily_csv(create(&out.join("evaluation_daily.csv"))?)?;
    report.write_histogram_csv(create(&out.join("error_histogram.csv"))?, 50)?;
    let output = EvaluationOutput { report, validation_band_coverage };
    write_json(&out.join("evaluation.json"), &output)?;
    for w in &output.report.windows {
        log::info!(
            "{}: rmse {:.0}, actual/predicted {:+.1}%, wilcoxon p {}",
            w.name,
            w.rmse,
            100.0 * w.ratio_actual_over_predicted,
            w.wilcoxon.as_ref().map_or("n/a".to_string(), |t| format!("{:.4}", t.p_value))
        );
    }
    Ok(output)
}

/// Relative tolerance for the equal-energy check across scenario kinds.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

pub fn cmd_scenario(cfg: &RunConfig, out: &Path) -> Result<Vec<ScenarioReport>> {
    prepare(cfg, out)?;
    let model = SavedModel::load(&model_path(cfg, out))?;
    let (_, panel) = load_inputs(cfg)?;
    let reports: Vec<ScenarioReport> = cfg
        .scenario_specs()
        .iter()
        .map(|spec| run_scenario(spec, model.predictor(), &panel))
        .collect::<Result<_>>()?;
    for a in &reports {
        for b in reports.iter().filter(|b| b.factor == a.factor && b.kind != a.kind) {
            let scale = a.removed_energy_mwh.abs().max(1.0);
            if (a.removed_energy_mwh - b.removed_energy_mwh).abs() > ENERGY_TOLERANCE * scale {
                return Err(Error::Numeric(format!(
                    "{} and {} remove different energy at factor {}: {} vs {} MWh",
                    a.kind, b.kind, a.factor, a.removed_energy_mwh, b.removed_energy_mwh
                )));
            }
        }
        log::info!(
            "{} x{}: {:+.0} EUR/h ({:+.1}% of predicted), {:.0} MWh removed",
            a.kind,
            a.factor,
            a.delta_per_hour,
            100.0 * a.relative_to_predicted,
            a.removed_energy_mwh
        );
    }
    write_table_csv(&reports, create(&out.join("scenario_table.csv"))?)?;
    write_json(&out.join("scenarios.json"), &reports)?;
    Ok(reports)
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<MarketDataset> {
    prepare(cfg, out)?;
    let data = generate(&cfg.synth)?;
    write_dataset(&data.dataset, out.join("zonal.csv"), out.join("national.csv"), out.join("holidays.txt"))?;
    let t = &data.truth;
    let mut w = csv::Writer::from_writer(create(&out.join("ground_truth.csv"))?);
    w.write_record(["timestamp", "noiseless_cost", "shocked", "system_demand", "counterfactual_system_demand"])?;
    for (i, r) in data.dataset.national.iter().enumerate() {
        w.write_record([
            format_timestamp(r.timestamp),
            t.noiseless_cost[i].to_string(),
            u8::from(t.shocked[i]).to_string(),
            t.system_demand[i].to_string(),
            t.counterfactual_system_demand[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("writing ground truth", e))?;
    log::info!("wrote {} synthetic hours to {}", data.dataset.hours(), out.display());
    Ok(data.dataset)
}
