//! Seeded synthetic market data with a known cost function.
//!
//! Hourly cost is
//! `b0 + b1*nd + b2*nd^2 + b3*|nd - ndfc| + b4*workday + noise` in system
//! net demand, multiplied by a premium inside the lockdown window. Demand in
//! that window is scaled down as well, so a model trained on earlier years
//! should see actual costs above its prediction by the premium.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::HourPrediction;
use crate::market_data::{assemble, calendar_flags, HourlyZonalRecord, IngestConfig, MarketDataset, RawNational, WinterMonths, ZoneId};
use crate::net_demand::NetDemandPanel;
use crate::predictor::CostPredictor;
use crate::splits::DateRange;

/// Average magnitudes for one zone, MWh per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneProfile {
    pub demand: f64,
    pub solar_capacity: f64,
    pub wind_capacity: f64,
    pub hydro: f64,
    pub imports: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub intercept: f64,
    /// EUR per MWh of system net demand.
    pub linear: f64,
    /// EUR per MWh^2.
    pub quadratic: f64,
    /// EUR per MWh of absolute system forecast error.
    pub forecast_error: f64,
    pub workday: f64,
    pub noise_std: f64,
}

impl CostParams {
    pub fn noiseless(&self, nd: f64, ndfc: f64, workday: bool) -> f64 {
        self.intercept
            + self.linear * nd
            + self.quadratic * nd * nd
            + self.forecast_error * (nd - ndfc).abs()
            + if workday { self.workday } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockdownShock {
    pub range: DateRange,
    pub demand_multiplier: f64,
    pub cost_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub range: DateRange,
    pub seed: u64,
    /// In canonical zone order.
    pub zones: [ZoneProfile; ZoneId::COUNT],
    pub cost: CostParams,
    /// Shock windows; empty for business as usual throughout.
    pub lockdown: Vec<LockdownShock>,
    /// Relative std of the demand forecast error.
    pub demand_forecast_noise: f64,
    /// Relative std of the solar forecast error.
    pub solar_forecast_noise: f64,
    /// Std of the wind forecast error as a fraction of capacity.
    pub wind_forecast_noise: f64,
    pub gas_price_mean: f64,
    /// Fixed-date public holidays as (month, day).
    pub holidays: Vec<(u32, u32)>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let z = |demand, solar_capacity, wind_capacity, hydro, imports| ZoneProfile {
            demand,
            solar_capacity,
            wind_capacity,
            hydro,
            imports,
        };
        Self {
            range: DateRange::ymd((2017, 1, 1), (2020, 4, 26)),
            seed: 2020,
            zones: [
                z(14_500.0, 3_200.0, 100.0, 1_500.0, 3_000.0),
                z(3_600.0, 900.0, 150.0, 150.0, 0.0),
                z(4_800.0, 1_200.0, 600.0, 200.0, 0.0),
                z(3_000.0, 2_400.0, 2_000.0, 100.0, 0.0),
                z(0.0, 10.0, 250.0, 20.0, 0.0),
                z(1_200.0, 500.0, 700.0, 20.0, 100.0),
                z(2_200.0, 900.0, 1_000.0, 20.0, 0.0),
            ],
            cost: CostParams {
                // 2e-3 * (nd - 30_000)^2 + 150_000: convex, minimum above typical load.
                intercept: 1_950_000.0,
                linear: -120.0,
                quadratic: 2e-3,
                forecast_error: 60.0,
                workday: 25_000.0,
                noise_std: 40_000.0,
            },
            lockdown: vec![LockdownShock {
                range: DateRange::ymd((2020, 3, 8), (2020, 4, 26)),
                demand_multiplier: 0.8,
                cost_multiplier: 1.25,
            }],
            demand_forecast_noise: 0.015,
            solar_forecast_noise: 0.1,
            wind_forecast_noise: 0.08,
            gas_price_mean: 20.0,
            holidays: vec![(1, 1), (1, 6), (4, 25), (5, 1), (6, 2), (8, 15), (11, 1), (12, 8), (12, 25), (12, 26)],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.cost;
        if !(c.noise_std >= 0.0) {
            return Err(Error::Spec(format!("noise_std must be non-negative, got {}", c.noise_std)));
        }
        for l in &self.lockdown {
            if !(l.demand_multiplier > 0.0 && l.demand_multiplier <= 1.0) {
                return Err(Error::Spec(format!("lockdown demand multiplier {} outside (0, 1]", l.demand_multiplier)));
            }
            if !(l.cost_multiplier > 0.0) {
                return Err(Error::Spec("lockdown cost multiplier must be positive".into()));
            }
        }
        for (z, p) in ZoneId::ALL.iter().zip(&self.zones) {
            if [p.demand, p.solar_capacity, p.wind_capacity, p.hydro].iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Spec(format!("zone {z} has a negative magnitude")));
            }
        }
        let noise = [self.demand_forecast_noise, self.solar_forecast_noise, self.wind_forecast_noise];
        if noise.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Spec("forecast noise levels must be non-negative".into()));
        }
        Ok(())
    }

    pub fn holiday_dates(&self) -> Result<BTreeSet<NaiveDate>> {
        let mut out = BTreeSet::new();
        for year in self.range.start.year()..=self.range.end.year() {
            for &(m, d) in &self.holidays {
                let date = NaiveDate::from_ymd_opt(year, m, d)
                    .ok_or_else(|| Error::Spec(format!("invalid holiday {m:02}-{d:02}")))?;
                out.insert(date);
            }
        }
        Ok(out)
    }
}

/// What the generator knows that the data does not show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cost: CostParams,
    /// Noiseless business-as-usual cost at the realised net demand.
    pub noiseless_cost: Vec<f64>,
    /// True inside the lockdown window.
    pub shocked: Vec<bool>,
    /// System demand as generated, and as it would have been without the lockdown.
    pub system_demand: Vec<f64>,
    pub counterfactual_system_demand: Vec<f64>,
}

pub struct SyntheticData {
    pub dataset: MarketDataset,
    pub truth: GroundTruth,
}

fn bell(x: f64, centre: f64, width: f64) -> f64 {
    (-(x - centre).powi(2) / (2.0 * width * width)).exp()
}

fn diurnal(hour: f64) -> f64 {
    0.82 + 0.18 * bell(hour, 11.0, 4.0) + 0.14 * bell(hour, 19.0, 3.0)
}

fn seasonal(doy: f64) -> f64 {
    1.0 + 0.06 * (2.0 * PI * (doy - 15.0) / 365.0).cos() + 0.07 * (-((doy - 200.0) / 25.0).powi(2)).exp()
}

/// Clear-sky solar shape in [0, 1] for an hour starting at `hour`.
fn daylight(hour: f64, doy: f64) -> f64 {
    let season = (2.0 * PI * (doy - 80.0) / 365.0).sin();
    let day_length = 12.0 + 3.0 * season;
    let x = (hour + 0.5 - (12.5 - day_length / 2.0)) / day_length;
    if (0.0..1.0).contains(&x) {
        (PI * x).sin() * (0.75 + 0.25 * season)
    } else {
        0.0
    }
}

pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData> {
    config.validate()?;
    let holidays = config.holiday_dates()?;
    let winter = WinterMonths::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let noise = Normal::new(0.0, config.cost.noise_std).map_err(|e| Error::Spec(e.to_string()))?;

    let days: Vec<NaiveDate> = config.range.days().collect();
    let hours = days.len() * 24;
    let t0 = Utc.from_utc_datetime(&config.range.start.and_hms_opt(0, 0, 0).expect("midnight"));

    let mut demand_ar = [0.0; ZoneId::COUNT];
    let mut wind_latent: [f64; ZoneId::COUNT] = std::array::from_fn(|_| 0.0);
    let mut cloud = [0.7; ZoneId::COUNT];
    let mut gas = config.gas_price_mean;

    let mut zonal = Vec::with_capacity(hours * ZoneId::COUNT);
    let mut national = Vec::with_capacity(hours);
    let mut truth = GroundTruth {
        cost: config.cost,
        noiseless_cost: Vec::with_capacity(hours),
        shocked: Vec::with_capacity(hours),
        system_demand: Vec::with_capacity(hours),
        counterfactual_system_demand: Vec::with_capacity(hours),
    };

    for t in 0..hours {
        let ts = t0 + Duration::hours(t as i64);
        let date = ts.date_naive();
        let hour = f64::from(ts.hour());
        let doy = f64::from(date.ordinal());
        let flags = calendar_flags(date, &holidays, &winter);
        let weekly = if flags.workday {
            1.0
        } else if date.weekday() == chrono::Weekday::Sat && !holidays.contains(&date) {
            0.85
        } else {
            0.75
        };
        let shock = config.lockdown.iter().find(|l| l.range.contains(date));

        if ts.hour() == 0 {
            for c in cloud.iter_mut() {
                *c = (0.7 + 0.6 * (*c - 0.7) + 0.15 * std_normal(&mut rng)).clamp(0.1, 1.0);
            }
            gas = (config.gas_price_mean + 0.97 * (gas - config.gas_price_mean) + 0.6 * std_normal(&mut rng)).max(5.0);
        }

        let (mut nd, mut ndfc, mut dem, mut dem_cf) = (0.0, 0.0, 0.0, 0.0);
        for (zi, zone) in ZoneId::ALL.iter().enumerate() {
            let p = &config.zones[zi];
            demand_ar[zi] = 0.95 * demand_ar[zi] + 0.01 * std_normal(&mut rng);
            let counterfactual = p.demand * diurnal(hour) * weekly * seasonal(doy) * (1.0 + demand_ar[zi]);
            let demand = counterfactual * shock.map_or(1.0, |l| l.demand_multiplier);
            let demand_fc = demand * (1.0 + config.demand_forecast_noise * std_normal(&mut rng));

            let solar = p.solar_capacity * daylight(hour, doy) * cloud[zi];
            let solar_fc = (solar * (1.0 + config.solar_forecast_noise * std_normal(&mut rng))).max(0.0);

            wind_latent[zi] = 0.97 * wind_latent[zi] + (1.0f64 - 0.97 * 0.97).sqrt() * std_normal(&mut rng);
            let wind = p.wind_capacity / (1.0 + (-(1.3 * wind_latent[zi] - 1.0)).exp());
            let wind_fc = (wind + config.wind_forecast_noise * p.wind_capacity * std_normal(&mut rng)).max(0.0);

            let hydro = p.hydro * (1.0 + 0.35 * (2.0 * PI * (doy - 110.0) / 365.0).sin());
            let imports = p.imports * (0.9 + 0.1 * (2.0 * PI * (hour - 3.0) / 24.0).cos());

            nd += demand - solar - wind - hydro - imports;
            ndfc += demand_fc - solar_fc - wind_fc - hydro - imports;
            dem += demand;
            dem_cf += counterfactual;
            zonal.push(HourlyZonalRecord {
                timestamp: ts,
                zone: *zone,
                demand_mwh: Some(demand),
                demand_forecast_mwh: Some(demand_fc.max(0.0)),
                solar_mwh: Some(solar),
                solar_forecast_mwh: Some(solar_fc),
                wind_mwh: Some(wind),
                wind_forecast_mwh: Some(wind_fc),
                hydro_ror_mwh: Some(hydro),
                net_imports_mwh: Some(imports),
            });
        }

        let bau = config.cost.noiseless(nd, ndfc, flags.workday);
        let cost = (bau + noise.sample(&mut rng)) * shock.map_or(1.0, |l| l.cost_multiplier);
        let da_price = (1.8 * gas + 0.0015 * nd + 5.0 * std_normal(&mut rng)).max(0.0);
        national.push(RawNational {
            timestamp: ts,
            redispatch_cost_eur: Some(cost),
            da_price_eur_mwh: Some(da_price),
            gas_price_eur_mwh: Some(gas),
        });
        truth.noiseless_cost.push(bau);
        truth.shocked.push(shock.is_some());
        truth.system_demand.push(dem);
        truth.counterfactual_system_demand.push(dem_cf);
    }

    let ingest = IngestConfig {
        start: Some(config.range.start),
        end: Some(config.range.end),
        winter_months: winter,
        ..IngestConfig::default()
    };
    let dataset = assemble(zonal, national, holidays, &ingest)?;
    Ok(SyntheticData { dataset, truth })
}

/// The generator's noiseless cost function applied to a panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthCost(pub CostParams);

impl CostPredictor for GroundTruthCost {
    fn predict_panel(&self, panel: &NetDemandPanel) -> Result<Vec<HourPrediction>> {
        Ok(panel
            .rows
            .iter()
            .map(|r| HourPrediction {
                timestamp: r.timestamp,
                date: r.date,
                actual: r.redispatch_cost,
                predicted: self.0.noiseless(r.nd_system, r.ndfc_system, r.flags.workday),
            })
            .collect())
    }
}

/// Mean of a ground-truth series over hours where `mask` holds.
pub fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = values.iter().zip(mask).filter(|(_, m)| **m).fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_design, FeatureSpec};
    use crate::linreg::least_squares;
    use crate::net_demand::build_panel;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            range: DateRange::ymd((2019, 3, 1), (2019, 3, 28)),
            lockdown: vec![LockdownShock {
                range: DateRange::ymd((2019, 3, 15), (2019, 3, 28)),
                demand_multiplier: 0.8,
                cost_multiplier: 1.25,
            }],
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.dataset.zonal, b.dataset.zonal);
        assert_eq!(a.dataset.national, b.dataset.national);
        let c = generate(&GeneratorConfig { seed: 7, ..small() }).unwrap();
        assert_ne!(a.dataset.national, c.dataset.national);
    }

    #[test]
    fn physical_series_are_valid() {
        let d = generate(&small()).unwrap().dataset;
        assert_eq!(d.national.len(), 28 * 24);
        assert_eq!(d.report.total_interpolated, 0);
        for r in &d.zonal {
            for v in [r.demand_mwh, r.solar_mwh, r.wind_mwh, r.hydro_ror_mwh, r.solar_forecast_mwh, r.wind_forecast_mwh] {
                assert!(v.unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn lockdown_scales_demand() {
        let t = generate(&small()).unwrap().truth;
        let actual = masked_mean(&t.system_demand, &t.shocked);
        let cf = masked_mean(&t.counterfactual_system_demand, &t.shocked);
        assert!((actual / cf - 0.8).abs() < 0.01);
    }

    #[test]
    fn linear_cost_is_recovered_exactly() {
        let cfg = GeneratorConfig {
            cost: CostParams { intercept: 1_000.0, linear: 12.5, quadratic: 0.0, forecast_error: 0.0, workday: 0.0, noise_std: 0.0 },
            lockdown: vec![],
            ..small()
        };
        let panel = build_panel(&generate(&cfg).unwrap().dataset).unwrap();
        let y: Vec<f64> = panel.rows.iter().map(|r| r.redispatch_cost).collect();
        let x = crate::features::Matrix::from_rows(&panel.rows.iter().map(|r| vec![r.nd_system]).collect::<Vec<_>>()).unwrap();
        let rows: Vec<usize> = (0..y.len()).collect();
        let fit = least_squares(&x, &y, &rows).unwrap();
        assert!((fit.coefficients[0] - 12.5).abs() < 1e-6);
        // The raw panel feeds the design builder without complaint.
        let split = crate::splits::make_split_with_windows(
            DateRange::ymd((2019, 3, 1), (2019, 3, 20)),
            0.7,
            1,
            DateRange::ymd((2019, 3, 21), (2019, 3, 24)),
            DateRange::ymd((2019, 3, 25), (2019, 3, 28)),
        )
        .unwrap();
        assert!(build_design(&panel, &FeatureSpec::dynamic(), &split).is_ok());
    }

    #[test]
    fn ground_truth_predictor_matches_noiseless_cost() {
        let data = generate(&GeneratorConfig { cost: CostParams { noise_std: 0.0, ..GeneratorConfig::default().cost }, lockdown: vec![], ..small() }).unwrap();
        let panel = build_panel(&data.dataset).unwrap();
        let pred = GroundTruthCost(data.truth.cost).predict_panel(&panel).unwrap();
        for (p, b) in pred.iter().zip(&data.truth.noiseless_cost) {
            assert!((p.predicted - b).abs() < 1e-6 * b.abs().max(1.0));
            assert!((p.actual - b).abs() < 1e-6 * b.abs().max(1.0));
        }
    }
}
