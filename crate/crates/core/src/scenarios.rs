//! Renewable-expansion counterfactuals.
//!
//! Each scenario lowers zonal net demand (actual and forecast in lockstep) by
//! extra wind and solar output, then compares a model's predicted costs on the
//! modified panel with its predictions on the untouched one. At equal factor
//! the three kinds remove the same total energy; they differ only in where and
//! when it is removed.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSpec, PriceColumn};
use crate::market_data::ZoneId;
use crate::net_demand::{mean, NetDemandPanel, ZoneValues};
use crate::predictor::CostPredictor;
use crate::splits::DateRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Scale each hour's zonal wind and solar.
    Scale,
    /// Add the zone's average extra output evenly over every hour.
    SmoothTime,
    /// Spread the system's average extra output evenly over hours and demand zones.
    SmoothTimeSpace,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Scale, ScenarioKind::SmoothTime, ScenarioKind::SmoothTimeSpace];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Scale => "scale",
            ScenarioKind::SmoothTime => "smooth_time",
            ScenarioKind::SmoothTimeSpace => "smooth_time_space",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub factor: f64,
    pub evaluation_range: DateRange,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, factor: f64) -> Self {
        Self { kind, factor, evaluation_range: DateRange::ymd((2017, 1, 1), (2020, 3, 7)) }
    }
}

fn check_factor(factor: f64) -> Result<()> {
    if factor > 0.0 && factor.is_finite() {
        Ok(())
    } else {
        Err(Error::Range(format!("scenario factor must be positive, got {factor}")))
    }
}

fn subtract(panel: &NetDemandPanel, mut delta: impl FnMut(usize, usize, bool) -> f64) -> NetDemandPanel {
    let mut out = panel.clone();
    for (t, row) in out.rows.iter_mut().enumerate() {
        for z in 0..ZoneId::COUNT {
            row.nd[z] -= delta(t, z, false);
            row.nd_fc[z] -= delta(t, z, true);
        }
        row.refresh_totals();
    }
    out
}

pub fn apply_scale(panel: &NetDemandPanel, factor: f64) -> Result<NetDemandPanel> {
    check_factor(factor)?;
    let k = factor - 1.0;
    Ok(subtract(panel, |t, z, fc| {
        let r = &panel.rows[t];
        k * if fc { r.res_fc[z] } else { r.res[z] }
    }))
}

/// Per-zone mean of actual wind plus solar over the panel.
pub fn zone_res_means(panel: &NetDemandPanel) -> ZoneValues {
    let mut m = [0.0; ZoneId::COUNT];
    for (z, v) in m.iter_mut().enumerate() {
        *v = mean(panel.rows.iter().map(|r| r.res[z]));
    }
    m
}

pub fn apply_smooth_time(panel: &NetDemandPanel, factor: f64) -> Result<NetDemandPanel> {
    check_factor(factor)?;
    let k = factor - 1.0;
    let means = zone_res_means(panel);
    Ok(subtract(panel, |_, z, _| k * means[z]))
}

pub fn apply_smooth_time_space(panel: &NetDemandPanel, factor: f64) -> Result<NetDemandPanel> {
    check_factor(factor)?;
    let k = factor - 1.0;
    let system: f64 = zone_res_means(panel).iter().sum();
    let demand_zones = ZoneId::ALL.iter().filter(|z| z.demand_zone()).count() as f64;
    let share = k * system / demand_zones;
    Ok(subtract(panel, |_, z, _| if ZoneId::ALL[z].demand_zone() { share } else { 0.0 }))
}

pub fn apply(kind: ScenarioKind, panel: &NetDemandPanel, factor: f64) -> Result<NetDemandPanel> {
    match kind {
        ScenarioKind::Scale => apply_scale(panel, factor),
        ScenarioKind::SmoothTime => apply_smooth_time(panel, factor),
        ScenarioKind::SmoothTimeSpace => apply_smooth_time_space(panel, factor),
    }
}

/// Total actual net demand removed, summed over hours and zones (MWh).
pub fn removed_energy(baseline: &NetDemandPanel, scenario: &NetDemandPanel) -> f64 {
    baseline
        .rows
        .iter()
        .zip(&scenario.rows)
        .flat_map(|(b, s)| b.nd.iter().zip(&s.nd).map(|(x, y)| x - y))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub kind: ScenarioKind,
    pub factor: f64,
    pub evaluation_range: DateRange,
    pub hours: usize,
    pub mean_actual: f64,
    pub baseline_mean_predicted: f64,
    pub scenario_mean_predicted: f64,
    /// Scenario minus baseline mean predicted cost, EUR per hour.
    pub delta_per_hour: f64,
    /// Delta over the baseline predicted mean.
    pub relative_to_predicted: f64,
    /// Delta over the mean actual cost.
    pub relative_to_actual: f64,
    pub removed_energy_mwh: f64,
    /// Mean zonal wind plus solar over the evaluation range, MWh per hour.
    pub zone_res_means: Vec<(ZoneId, f64)>,
}

/// Checks that `spec` is the counterfactual specification: gas price and
/// the 24-hour lag/lead structure.
pub fn check_counterfactual_spec(spec: &FeatureSpec) -> Result<()> {
    let want = FeatureSpec::counterfactual();
    if spec.price_column != PriceColumn::GasPrice {
        return Err(Error::Spec(format!("scenario models must use gas_price, model uses {}", spec.price_column)));
    }
    if spec.lags_system_nd != want.lags_system_nd || spec.leads_system_ndfc != want.leads_system_ndfc {
        return Err(Error::Spec(format!(
            "scenario models need {} lags and {} leads, model has {} and {}",
            want.lags_system_nd, want.leads_system_ndfc, spec.lags_system_nd, spec.leads_system_ndfc
        )));
    }
    Ok(())
}

/// Runs a scenario after checking the model's feature specification.
pub fn run_scenario(spec: &ScenarioSpec, model: &dyn CostPredictor, panel: &NetDemandPanel) -> Result<ScenarioReport> {
    let fs = model.feature_spec().ok_or_else(|| Error::Spec("model has no feature specification".into()))?;
    check_counterfactual_spec(fs)?;
    run_scenario_with(spec, model, panel)
}

/// Runs a scenario with any predictor, skipping the specification check.
pub fn run_scenario_with(spec: &ScenarioSpec, model: &dyn CostPredictor, panel: &NetDemandPanel) -> Result<ScenarioReport> {
    check_factor(spec.factor)?;
    let r = spec.evaluation_range;
    let baseline = panel.slice_dates(r.start, r.end);
    if baseline.is_empty() {
        return Err(Error::Coverage { window: "scenario".into(), detail: format!("panel has no hours in {} to {}", r.start, r.end) });
    }
    let modified = apply(spec.kind, &baseline, spec.factor)?;
    let base_pred = model.predict_panel(&baseline)?;
    let scen_pred = model.predict_panel(&modified)?;
    if base_pred.len() != scen_pred.len() || base_pred.is_empty() {
        return Err(Error::Shape { expected: base_pred.len(), actual: scen_pred.len() });
    }
    let n = base_pred.len() as f64;
    let mean_actual = base_pred.iter().map(|h| h.actual).sum::<f64>() / n;
    let baseline_mean_predicted = base_pred.iter().map(|h| h.predicted).sum::<f64>() / n;
    let scenario_mean_predicted = scen_pred.iter().map(|h| h.predicted).sum::<f64>() / n;
    let delta = scenario_mean_predicted - baseline_mean_predicted;
    let means = zone_res_means(&baseline);
    Ok(ScenarioReport {
        kind: spec.kind,
        factor: spec.factor,
        evaluation_range: r,
        hours: base_pred.len(),
        mean_actual,
        baseline_mean_predicted,
        scenario_mean_predicted,
        delta_per_hour: delta,
        relative_to_predicted: delta / baseline_mean_predicted,
        relative_to_actual: delta / mean_actual,
        removed_energy_mwh: removed_energy(&baseline, &modified),
        zone_res_means: ZoneId::ALL.iter().map(|z| (*z, means[z.index()])).collect(),
    })
}

/// One row per scenario: kind, delta EUR/hour and both relative changes.
pub fn write_table_csv<W: Write>(reports: &[ScenarioReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["kind", "factor", "delta_eur_per_hour", "relative_to_predicted", "relative_to_actual", "removed_energy_mwh"])?;
    for r in reports {
        wtr.write_record([
            r.kind.to_string(),
            r.factor.to_string(),
            r.delta_per_hour.to_string(),
            r.relative_to_predicted.to_string(),
            r.relative_to_actual.to_string(),
            r.removed_energy_mwh.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("writing scenario table", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub factor: f64,
    pub implied_output_mwh: f64,
}

/// Renewable scale factor whose extra output matches a given demand drop.
pub fn renewable_equivalence(avg_demand: f64, avg_res: f64, demand_drop: f64) -> Result<Equivalence> {
    if avg_res == 0.0 {
        return Err(Error::Range("average renewable output is zero".into()));
    }
    if !(avg_res > 0.0) || !(demand_drop > 0.0 && demand_drop < 1.0) {
        return Err(Error::Range(format!("need avg_res > 0 and 0 < drop < 1, got {avg_res} and {demand_drop}")));
    }
    let factor = 1.0 + demand_drop * avg_demand / avg_res;
    Ok(Equivalence { factor, implied_output_mwh: factor * avg_res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::CalendarFlags;
    use crate::net_demand::PanelRow;
    use chrono::{Duration, TimeZone, Utc};

    fn panel(res: impl Fn(usize, usize) -> f64) -> NetDemandPanel {
        let t0 = Utc.with_ymd_and_hms(2019, 6, 1, 0, 0, 0).unwrap();
        let rows = (0..48)
            .map(|t| {
                let ts = t0 + Duration::hours(t as i64);
                let r: ZoneValues = std::array::from_fn(|z| res(t, z));
                let mut row = PanelRow {
                    timestamp: ts,
                    date: ts.date_naive(),
                    nd: std::array::from_fn(|z| 1000.0 + 10.0 * z as f64 - r[z]),
                    nd_fc: std::array::from_fn(|z| 990.0 - r[z]),
                    res: r,
                    res_fc: std::array::from_fn(|z| 0.9 * r[z]),
                    nd_system: 0.0,
                    ndfc_system: 0.0,
                    da_price: 50.0,
                    gas_price: 20.0,
                    redispatch_cost: 1.0,
                    flags: CalendarFlags { workday: true, winter: false },
                };
                row.refresh_totals();
                row
            })
            .collect();
        NetDemandPanel { rows }
    }

    fn varied() -> NetDemandPanel {
        panel(|t, z| if z == 1 { 0.0 } else { ((t * 7 + z * 3) % 11) as f64 * 50.0 })
    }

    #[test]
    fn factor_one_is_identity() {
        let p = varied();
        for k in ScenarioKind::ALL {
            assert_eq!(apply(k, &p, 1.0).unwrap(), p);
        }
    }

    #[test]
    fn scale_by_two_subtracts_output() {
        let p = panel(|_, z| if z == 0 { 500.0 } else { 0.0 });
        let s = apply_scale(&p, 2.0).unwrap();
        assert_eq!(s.rows[0].nd[0], p.rows[0].nd[0] - 500.0);
        assert_eq!(s.rows[0].nd_fc[0], p.rows[0].nd_fc[0] - 450.0);
        assert_eq!(s.rows[0].nd[2], p.rows[0].nd[2]);
        assert_eq!(s.rows[0].redispatch_cost, p.rows[0].redispatch_cost);
    }

    #[test]
    fn smooth_time_matches_scale_for_constant_output() {
        let p = panel(|_, z| 100.0 * z as f64);
        let a = apply_scale(&p, 2.0).unwrap();
        let b = apply_smooth_time(&p, 2.0).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.nd, y.nd);
        }
        // Zone without renewables is untouched.
        assert_eq!(b.rows[5].nd[0], p.rows[5].nd[0]);
    }

    #[test]
    fn smooth_space_leaves_rossano_alone() {
        let p = varied();
        let s = apply_smooth_time_space(&p, 2.0).unwrap();
        let r = ZoneId::Rossano.index();
        let cuts: Vec<f64> = (0..ZoneId::COUNT).map(|z| p.rows[3].nd[z] - s.rows[3].nd[z]).collect();
        assert_eq!(cuts[r], 0.0);
        let first = cuts[0];
        for (z, c) in cuts.iter().enumerate() {
            if z != r {
                assert!((c - first).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn energy_is_conserved_across_kinds() {
        let p = varied();
        let e: Vec<f64> = ScenarioKind::ALL.iter().map(|k| removed_energy(&p, &apply(*k, &p, 2.0).unwrap())).collect();
        for v in &e[1..] {
            assert!((v - e[0]).abs() <= 1e-9 * e[0].abs());
        }
    }

    #[test]
    fn factor_must_be_positive() {
        assert!(matches!(apply_scale(&varied(), 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn equivalence_examples() {
        let e = renewable_equivalence(31_600.0, 4_900.0, 0.2).unwrap();
        assert!((e.factor - (1.0 + 6_320.0 / 4_900.0)).abs() < 1e-12);
        assert!((e.implied_output_mwh - 11_220.0).abs() < 1e-9);
        assert!((renewable_equivalence(10.0, 10.0, 0.5).unwrap().factor - 1.5).abs() < 1e-15);
        assert!(matches!(renewable_equivalence(1.0, 0.0, 0.2), Err(Error::Range(_))));
    }

    #[test]
    fn spec_check() {
        assert!(check_counterfactual_spec(&FeatureSpec::counterfactual()).is_ok());
        assert!(matches!(check_counterfactual_spec(&FeatureSpec::dynamic()), Err(Error::Spec(_))));
        assert!(matches!(check_counterfactual_spec(&FeatureSpec::preferred()), Err(Error::Spec(_))));
    }
}
