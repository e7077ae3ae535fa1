//! Zonal and system net demand, actual and day-ahead forecast.
//!
//! `ND_z = D_z - (solar_z + wind_z) - hydro_z - imports_z`. The forecast
//! analogue swaps demand and renewables for their day-ahead forecasts; hydro
//! run-of-river and net imports are firm after day-ahead clearing and enter at
//! their actual values.

use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};

use crate::error::{Error, Result};
use crate::market_data::{format_timestamp, CalendarFlags, HourlyZonalRecord, MarketDataset, ZoneId};

pub type ZoneValues = [f64; ZoneId::COUNT];

fn component(v: Option<f64>, name: &str, r: &HourlyZonalRecord) -> Result<f64> {
    v.ok_or_else(|| Error::Completeness(format!("{name} missing for {} at {}", r.zone, r.timestamp.to_rfc3339())))
}

pub fn zonal_net_demand(r: &HourlyZonalRecord) -> Result<f64> {
    let d = component(r.demand_mwh, "demand_mwh", r)?;
    let res = component(r.solar_mwh, "solar_mwh", r)? + component(r.wind_mwh, "wind_mwh", r)?;
    let hydro = component(r.hydro_ror_mwh, "hydro_ror_mwh", r)?;
    let imp = component(r.net_imports_mwh, "net_imports_mwh", r)?;
    Ok(d - res - hydro - imp)
}

pub fn zonal_net_demand_forecast(r: &HourlyZonalRecord) -> Result<f64> {
    let d = component(r.demand_forecast_mwh, "demand_forecast_mwh", r)?;
    let res = component(r.solar_forecast_mwh, "solar_forecast_mwh", r)?
        + component(r.wind_forecast_mwh, "wind_forecast_mwh", r)?;
    let hydro = component(r.hydro_ror_mwh, "hydro_ror_mwh", r)?;
    let imp = component(r.net_imports_mwh, "net_imports_mwh", r)?;
    Ok(d - res - hydro - imp)
}

/// Sum over zones in canonical zone order.
pub fn system_total(values: &ZoneValues) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub timestamp: DateTime<Utc>,
    /// Local calendar day.
    pub date: NaiveDate,
    pub nd: ZoneValues,
    pub nd_fc: ZoneValues,
    /// Wind plus solar, actual and forecast; kept for renewable counterfactuals.
    pub res: ZoneValues,
    pub res_fc: ZoneValues,
    pub nd_system: f64,
    pub ndfc_system: f64,
    pub da_price: f64,
    pub gas_price: f64,
    pub redispatch_cost: f64,
    pub flags: CalendarFlags,
}

impl PanelRow {
    /// Recomputes the system totals after zonal values change.
    pub fn refresh_totals(&mut self) {
        self.nd_system = system_total(&self.nd);
        self.ndfc_system = system_total(&self.nd_fc);
    }
}

/// Hourly national panel, chronologically ordered and contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct NetDemandPanel {
    pub rows: Vec<PanelRow>,
}

impl NetDemandPanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose local date lies in `[start, end]`.
    pub fn slice_dates(&self, start: NaiveDate, end: NaiveDate) -> NetDemandPanel {
        NetDemandPanel {
            rows: self.rows.iter().filter(|r| r.date >= start && r.date <= end).cloned().collect(),
        }
    }

    pub fn is_contiguous(&self) -> bool {
        self.rows.windows(2).all(|w| (w[1].timestamp - w[0].timestamp).num_hours() == 1)
    }

    pub fn zone_mean(&self, zone: ZoneId) -> f64 {
        mean(self.rows.iter().map(|r| r.nd[zone.index()]))
    }

    pub fn csv_header() -> Vec<String> {
        let mut h = vec!["timestamp".to_string()];
        h.extend(ZoneId::ALL.iter().map(|z| format!("nd_{z}")));
        h.extend(ZoneId::ALL.iter().map(|z| format!("ndfc_{z}")));
        for c in ["nd_system", "ndfc_system", "da_price", "gas_price", "redispatch_cost", "workday", "winter"] {
            h.push(c.to_string());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::csv_header())?;
        for r in &self.rows {
            let mut row = vec![format_timestamp(r.timestamp)];
            row.extend(r.nd.iter().map(f64::to_string));
            row.extend(r.nd_fc.iter().map(f64::to_string));
            row.extend([r.nd_system, r.ndfc_system, r.da_price, r.gas_price, r.redispatch_cost].map(|v| v.to_string()));
            row.push(u8::from(r.flags.workday).to_string());
            row.push(u8::from(r.flags.winter).to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("writing panel csv", e))?;
        Ok(())
    }
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn build_panel(ds: &MarketDataset) -> Result<NetDemandPanel> {
    let flags = ds.calendar()?;
    let mut rows = Vec::with_capacity(ds.hours());
    for (i, nat) in ds.national.iter().enumerate() {
        let zonal = ds.zonal_hour(i);
        if zonal.len() != ZoneId::COUNT {
            return Err(Error::Completeness(format!("hour {} has {} zonal records", nat.timestamp, zonal.len())));
        }
        let mut nd = [0.0; ZoneId::COUNT];
        let mut nd_fc = [0.0; ZoneId::COUNT];
        let mut res = [0.0; ZoneId::COUNT];
        let mut res_fc = [0.0; ZoneId::COUNT];
        for r in zonal {
            if r.timestamp != nat.timestamp {
                return Err(Error::Completeness(format!("zonal record {} misaligned with hour {}", r.timestamp, nat.timestamp)));
            }
            let z = r.zone.index();
            nd[z] = zonal_net_demand(r)?;
            nd_fc[z] = zonal_net_demand_forecast(r)?;
            res[z] = r.solar_mwh.unwrap_or(0.0) + r.wind_mwh.unwrap_or(0.0);
            res_fc[z] = r.solar_forecast_mwh.unwrap_or(0.0) + r.wind_forecast_mwh.unwrap_or(0.0);
        }
        let mut row = PanelRow {
            timestamp: nat.timestamp,
            date: ds.local_date(nat.timestamp),
            nd,
            nd_fc,
            res,
            res_fc,
            nd_system: 0.0,
            ndfc_system: 0.0,
            da_price: nat.da_price_eur_mwh,
            gas_price: nat.gas_price_eur_mwh,
            redispatch_cost: nat.redispatch_cost_eur,
            flags: flags[i],
        };
        row.refresh_totals();
        rows.push(row);
    }
    Ok(NetDemandPanel { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record(d: f64, solar: f64, wind: f64, hydro: f64, imp: f64) -> HourlyZonalRecord {
        HourlyZonalRecord {
            timestamp: Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
            zone: ZoneId::North,
            demand_mwh: Some(d),
            demand_forecast_mwh: Some(d),
            solar_mwh: Some(solar),
            solar_forecast_mwh: Some(solar),
            wind_mwh: Some(wind),
            wind_forecast_mwh: Some(wind),
            hydro_ror_mwh: Some(hydro),
            net_imports_mwh: Some(imp),
        }
    }

    #[test]
    fn net_demand_arithmetic() {
        assert_eq!(zonal_net_demand(&record(0.0, 0.0, 0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(zonal_net_demand(&record(10_000.0, 1_500.0, 500.0, 1_000.0, 3_000.0)).unwrap(), 4_000.0);
    }

    #[test]
    fn forecast_uses_forecast_demand_and_renewables() {
        let mut r = record(10_000.0, 1_500.0, 500.0, 1_000.0, 3_000.0);
        assert_eq!(zonal_net_demand_forecast(&r).unwrap(), zonal_net_demand(&r).unwrap());
        r.demand_forecast_mwh = Some(10_100.0);
        r.solar_forecast_mwh = Some(1_400.0);
        r.wind_forecast_mwh = Some(500.0);
        assert_eq!(zonal_net_demand_forecast(&r).unwrap(), 4_200.0);
    }

    #[test]
    fn production_only_zone_is_non_positive() {
        let mut r = record(0.0, 30.0, 80.0, 5.0, 0.0);
        r.zone = ZoneId::Rossano;
        assert!(zonal_net_demand(&r).unwrap() <= 0.0);
    }

    #[test]
    fn missing_component_is_incomplete() {
        let mut r = record(1.0, 0.0, 0.0, 0.0, 0.0);
        r.hydro_ror_mwh = None;
        assert!(matches!(zonal_net_demand(&r), Err(Error::Completeness(_))));
        assert!(matches!(zonal_net_demand_forecast(&r), Err(Error::Completeness(_))));
    }

    #[test]
    fn scaling_renewables_shifts_net_demand_linearly() {
        let r = record(10_000.0, 1_500.0, 500.0, 1_000.0, 3_000.0);
        let k = 2.5;
        let mut scaled = r.clone();
        scaled.solar_mwh = Some(1_500.0 * k);
        scaled.wind_mwh = Some(500.0 * k);
        let diff = zonal_net_demand(&scaled).unwrap() - zonal_net_demand(&r).unwrap();
        assert_eq!(diff, -(k - 1.0) * 2_000.0);
    }

    #[test]
    fn panel_csv_header_has_fourteen_zonal_columns() {
        let h = NetDemandPanel::csv_header();
        assert_eq!(h.iter().filter(|c| c.starts_with("nd_") && *c != "nd_system").count(), 7);
        assert_eq!(h.iter().filter(|c| c.starts_with("ndfc_") && *c != "ndfc_system").count(), 7);
        assert_eq!(h[1], "nd_North");
        assert_eq!(h.last().unwrap(), "winter");
    }
}
