//! Hourly zonal market data: CSV ingestion, validation, gap filling and
//! calendar annotation.
//!
//! Timestamps are held in UTC. A file may declare the timezone of naive
//! timestamps in a leading comment (`# timezone: Europe/Rome`); timestamps
//! carrying an explicit offset are converted directly. Calendar days (for
//! workday flags, gas-price expansion and fold assignment) follow the
//! dataset's configured timezone.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Utc, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZONAL_HEADER: [&str; 10] = [
    "timestamp",
    "zone",
    "demand_mwh",
    "demand_forecast_mwh",
    "solar_mwh",
    "solar_forecast_mwh",
    "wind_mwh",
    "wind_forecast_mwh",
    "hydro_ror_mwh",
    "net_imports_mwh",
];

pub const NATIONAL_HEADER: [&str; 4] = [
    "timestamp",
    "redispatch_cost_eur",
    "da_price_eur_mwh",
    "gas_price_eur_mwh",
];

/// Italian bidding zones in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ZoneId {
    North,
    CenterNorth,
    CenterSouth,
    South,
    Rossano,
    Sardinia,
    Sicily,
}

impl ZoneId {
    pub const COUNT: usize = 7;

    pub const ALL: [ZoneId; 7] = [
        ZoneId::North,
        ZoneId::CenterNorth,
        ZoneId::CenterSouth,
        ZoneId::South,
        ZoneId::Rossano,
        ZoneId::Sardinia,
        ZoneId::Sicily,
    ];

    /// Rossano is a limited-production zone with no load of its own.
    pub fn demand_zone(self) -> bool {
        self != ZoneId::Rossano
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ZoneId::North => "North",
            ZoneId::CenterNorth => "CenterNorth",
            ZoneId::CenterSouth => "CenterSouth",
            ZoneId::South => "South",
            ZoneId::Rossano => "Rossano",
            ZoneId::Sardinia => "Sardinia",
            ZoneId::Sicily => "Sicily",
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ZoneId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ZoneId::ALL
            .into_iter()
            .find(|z| z.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown zone `{s}`"))
    }
}

/// One hour of one zone. Energy in MWh; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyZonalRecord {
    pub timestamp: DateTime<Utc>,
    pub zone: ZoneId,
    pub demand_mwh: Option<f64>,
    pub demand_forecast_mwh: Option<f64>,
    pub solar_mwh: Option<f64>,
    pub solar_forecast_mwh: Option<f64>,
    pub wind_mwh: Option<f64>,
    pub wind_forecast_mwh: Option<f64>,
    pub hydro_ror_mwh: Option<f64>,
    pub net_imports_mwh: Option<f64>,
}

impl HourlyZonalRecord {
    const FIELD_COUNT: usize = 8;

    fn fields(&self) -> [Option<f64>; Self::FIELD_COUNT] {
        [
            self.demand_mwh,
            self.demand_forecast_mwh,
            self.solar_mwh,
            self.solar_forecast_mwh,
            self.wind_mwh,
            self.wind_forecast_mwh,
            self.hydro_ror_mwh,
            self.net_imports_mwh,
        ]
    }

    fn from_fields(timestamp: DateTime<Utc>, zone: ZoneId, f: [Option<f64>; Self::FIELD_COUNT]) -> Self {
        Self {
            timestamp,
            zone,
            demand_mwh: f[0],
            demand_forecast_mwh: f[1],
            solar_mwh: f[2],
            solar_forecast_mwh: f[3],
            wind_mwh: f[4],
            wind_forecast_mwh: f[5],
            hydro_ror_mwh: f[6],
            net_imports_mwh: f[7],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NationalHourlyRecord {
    pub timestamp: DateTime<Utc>,
    pub redispatch_cost_eur: f64,
    pub da_price_eur_mwh: f64,
    pub gas_price_eur_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarFlags {
    pub workday: bool,
    pub winter: bool,
}

/// Months (1..=12) counted as winter for the winter indicator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinterMonths(BTreeSet<u32>);

impl WinterMonths {
    pub fn new(months: impl IntoIterator<Item = u32>) -> Result<Self> {
        let set: BTreeSet<u32> = months.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Range("winter month set is empty".into()));
        }
        if let Some(bad) = set.iter().find(|m| !(1..=12).contains(*m)) {
            return Err(Error::Range(format!("month {bad} is not in 1..=12")));
        }
        Ok(Self(set))
    }

    /// October through April, as in the data description table.
    pub fn october_to_april() -> Self {
        Self([10, 11, 12, 1, 2, 3, 4].into_iter().collect())
    }

    /// December through April, as in the model description text.
    pub fn december_to_april() -> Self {
        Self([12, 1, 2, 3, 4].into_iter().collect())
    }

    pub fn contains(&self, month: u32) -> bool {
        self.0.contains(&month)
    }

    pub fn months(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }
}

impl Default for WinterMonths {
    fn default() -> Self {
        Self::october_to_april()
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// First and last local calendar day to keep; `None` keeps the span of the files.
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub max_gap: usize,
    /// Timezone defining calendar days.
    pub timezone: Tz,
    pub winter_months: WinterMonths,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            max_gap: 6,
            timezone: Tz::UTC,
            winter_months: WinterMonths::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub national_rows: usize,
    pub zonal_rows: usize,
    /// Local days in the loaded range times 24, for comparison with `national_rows`.
    pub naive_hour_count: usize,
    /// Interpolated cells per column, summed over zones.
    pub interpolated: BTreeMap<String, usize>,
    pub total_interpolated: usize,
    pub warnings: Vec<String>,
}

/// A validated, gap-free hourly dataset. Immutable after loading.
#[derive(Debug, Clone)]
pub struct MarketDataset {
    /// Sorted by timestamp, then zone; exactly 7 records per hour.
    pub zonal: Vec<HourlyZonalRecord>,
    /// One record per hour, sorted.
    pub national: Vec<NationalHourlyRecord>,
    pub holidays: BTreeSet<NaiveDate>,
    pub timezone: Tz,
    pub winter_months: WinterMonths,
    pub report: IngestReport,
}

impl MarketDataset {
    pub fn hours(&self) -> usize {
        self.national.len()
    }

    /// Zonal records of hour `i` in zone order.
    pub fn zonal_hour(&self, i: usize) -> &[HourlyZonalRecord] {
        &self.zonal[i * ZoneId::COUNT..(i + 1) * ZoneId::COUNT]
    }

    pub fn local_date(&self, t: DateTime<Utc>) -> NaiveDate {
        t.with_timezone(&self.timezone).date_naive()
    }

    pub fn calendar(&self) -> Result<Vec<CalendarFlags>> {
        let ts: Vec<_> = self.national.iter().map(|r| r.timestamp).collect();
        annotate_calendar(&ts, &self.holidays, &self.winter_months, self.timezone)
    }
}

/// Linear interpolation over interior gaps of at most `max_gap` values.
pub fn interpolate_gaps(series: &[Option<f64>], max_gap: usize) -> Result<Vec<f64>> {
    interpolate_named(series, max_gap, "series").map(|(v, _)| v)
}

/// Returns the filled series and the number of filled cells.
fn interpolate_named(series: &[Option<f64>], max_gap: usize, name: &str) -> Result<(Vec<f64>, usize)> {
    if series.is_empty() {
        return Ok((Vec::new(), 0));
    }
    if series[0].is_none() {
        return Err(Error::Boundary { series: name.to_string(), side: "leading" });
    }
    if series[series.len() - 1].is_none() {
        return Err(Error::Boundary { series: name.to_string(), side: "trailing" });
    }
    let mut out = Vec::with_capacity(series.len());
    let mut filled = 0;
    let mut i = 0;
    while i < series.len() {
        match series[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let start = i;
                while series[i].is_none() {
                    i += 1;
                }
                let len = i - start;
                if len > max_gap {
                    return Err(Error::Gap { series: name.to_string(), start, length: len, max_gap });
                }
                let left = out[start - 1];
                let right = series[i].expect("gap ends on a present value");
                let span = (len + 1) as f64;
                for k in 1..=len {
                    let w = k as f64 / span;
                    out.push(left + w * (right - left));
                }
                filled += len;
            }
        }
    }
    Ok((out, filled))
}

pub fn annotate_calendar(
    timestamps: &[DateTime<Utc>],
    holidays: &BTreeSet<NaiveDate>,
    winter_months: &WinterMonths,
    timezone: Tz,
) -> Result<Vec<CalendarFlags>> {
    if winter_months.0.is_empty() {
        return Err(Error::Range("winter month set is empty".into()));
    }
    Ok(timestamps
        .iter()
        .map(|t| calendar_flags(t.with_timezone(&timezone).date_naive(), holidays, winter_months))
        .collect())
}

pub fn calendar_flags(date: NaiveDate, holidays: &BTreeSet<NaiveDate>, winter_months: &WinterMonths) -> CalendarFlags {
    let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
    CalendarFlags {
        workday: !weekend && !holidays.contains(&date),
        winter: winter_months.contains(date.month()),
    }
}

pub fn parse_holidays(text: &str, label: &str) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
            path: label.into(),
            line: i as u64 + 1,
            message: format!("invalid date `{line}`: {e}"),
        })?;
        out.insert(date);
    }
    Ok(out)
}

pub fn load_dataset(
    zonal_path: impl AsRef<Path>,
    national_path: impl AsRef<Path>,
    holidays_path: impl AsRef<Path>,
    config: &IngestConfig,
) -> Result<MarketDataset> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e));
    let zonal_path = zonal_path.as_ref();
    let national_path = national_path.as_ref();
    let holidays_path = holidays_path.as_ref();
    let zonal_text = read(zonal_path)?;
    let national_text = read(national_path)?;
    let holidays = parse_holidays(&read(holidays_path)?, &holidays_path.display().to_string())?;
    let zonal = parse_zonal_csv(&zonal_text, zonal_path)?;
    let national = parse_national_csv(&national_text, national_path)?;
    assemble(zonal, national, holidays, config)
}

/// Builds a dataset from already parsed raw rows (used by the loader and the
/// synthetic generator).
pub fn assemble(
    zonal: Vec<HourlyZonalRecord>,
    national: Vec<RawNational>,
    holidays: BTreeSet<NaiveDate>,
    config: &IngestConfig,
) -> Result<MarketDataset> {
    let tz = config.timezone;
    let mut report = IngestReport::default();

    let local_day_bounds = |d: NaiveDate, last: bool| -> Result<DateTime<Utc>> {
        let t = if last {
            d.succ_opt().expect("date in range").and_hms_opt(0, 0, 0).unwrap()
        } else {
            d.and_hms_opt(0, 0, 0).unwrap()
        };
        let utc = localize(tz, t, &mut HashSet::new())
            .ok_or_else(|| Error::Range(format!("local midnight {t} does not exist in {tz}")))?;
        Ok(if last { utc - Duration::hours(1) } else { utc })
    };

    let data_min = national.iter().map(|r| r.timestamp).chain(zonal.iter().map(|r| r.timestamp)).min();
    let data_max = national.iter().map(|r| r.timestamp).chain(zonal.iter().map(|r| r.timestamp)).max();
    let (Some(data_min), Some(data_max)) = (data_min, data_max) else {
        return Err(Error::Range("dataset contains no rows".into()));
    };
    let first = match config.start {
        Some(d) => local_day_bounds(d, false)?,
        None => data_min,
    };
    let last = match config.end {
        Some(d) => local_day_bounds(d, true)?,
        None => data_max,
    };
    if last < first {
        return Err(Error::Range(format!("empty range {first} .. {last}")));
    }
    let hours = ((last - first).num_hours() + 1) as usize;
    let index_of = |t: DateTime<Utc>| -> Option<usize> {
        if t < first || t > last {
            None
        } else {
            Some((t - first).num_hours() as usize)
        }
    };

    // Zonal grid: per zone, per field, per hour.
    let mut grid: Vec<Vec<[Option<f64>; HourlyZonalRecord::FIELD_COUNT]>> =
        vec![vec![[None; HourlyZonalRecord::FIELD_COUNT]; hours]; ZoneId::COUNT];
    let mut seen = vec![vec![false; hours]; ZoneId::COUNT];
    for rec in &zonal {
        let Some(i) = index_of(rec.timestamp) else { continue };
        let z = rec.zone.index();
        if seen[z][i] {
            return Err(Error::Duplicate { timestamp: rec.timestamp.to_rfc3339(), key: rec.zone.to_string() });
        }
        seen[z][i] = true;
        grid[z][i] = rec.fields();
    }
    let missing_rows: usize = seen.iter().flatten().filter(|s| !**s).count();
    if missing_rows > 0 {
        report.warnings.push(format!("{missing_rows} zonal rows absent from the hourly grid were reconstructed"));
    }

    let mut filled_zonal: Vec<Vec<[f64; HourlyZonalRecord::FIELD_COUNT]>> =
        vec![vec![[0.0; HourlyZonalRecord::FIELD_COUNT]; hours]; ZoneId::COUNT];
    for zone in ZoneId::ALL {
        let z = zone.index();
        for f in 0..HourlyZonalRecord::FIELD_COUNT {
            let column: Vec<Option<f64>> = grid[z].iter().map(|row| row[f]).collect();
            let name = format!("{}[{}]", ZONAL_HEADER[f + 2], zone);
            let (values, n) = interpolate_named(&column, config.max_gap, &name)?;
            *report.interpolated.entry(ZONAL_HEADER[f + 2].to_string()).or_default() += n;
            for (i, v) in values.into_iter().enumerate() {
                filled_zonal[z][i][f] = v;
            }
        }
    }

    // National grid.
    let mut nat: Vec<Option<&RawNational>> = vec![None; hours];
    for rec in &national {
        let Some(i) = index_of(rec.timestamp) else { continue };
        if nat[i].is_some() {
            return Err(Error::Duplicate { timestamp: rec.timestamp.to_rfc3339(), key: "national".into() });
        }
        nat[i] = Some(rec);
    }
    let timestamps: Vec<DateTime<Utc>> = (0..hours).map(|i| first + Duration::hours(i as i64)).collect();
    let dates: Vec<NaiveDate> = timestamps.iter().map(|t| t.with_timezone(&tz).date_naive()).collect();

    let mut cost = Vec::with_capacity(hours);
    let mut price = Vec::with_capacity(hours);
    for (i, r) in nat.iter().enumerate() {
        let (c, p) = match r {
            Some(r) => (r.redispatch_cost_eur, r.da_price_eur_mwh),
            None => (None, None),
        };
        let missing = |what: &str| Error::Completeness(format!("{what} missing at {}", timestamps[i].to_rfc3339()));
        cost.push(c.ok_or_else(|| missing("redispatch_cost_eur"))?);
        price.push(p.ok_or_else(|| missing("da_price_eur_mwh"))?);
    }

    // Gas: collapse to local days, interpolate the daily series, expand by repetition.
    let mut day_values: BTreeMap<NaiveDate, Option<f64>> = BTreeMap::new();
    for (i, r) in nat.iter().enumerate() {
        let slot = day_values.entry(dates[i]).or_insert(None);
        if let Some(g) = r.and_then(|r| r.gas_price_eur_mwh) {
            match slot {
                Some(prev) if (*prev - g).abs() > 1e-9 => {
                    return Err(Error::Completeness(format!(
                        "gas price varies within day {}: {prev} vs {g}",
                        dates[i]
                    )));
                }
                Some(_) => {}
                None => *slot = Some(g),
            }
        }
    }
    let days: Vec<NaiveDate> = day_values.keys().copied().collect();
    let daily: Vec<Option<f64>> = day_values.values().copied().collect();
    let (daily_filled, gas_days_filled) = interpolate_named(&daily, config.max_gap, "gas_price_eur_mwh")?;
    let gas_of: BTreeMap<NaiveDate, f64> = days.iter().copied().zip(daily_filled).collect();
    let gas_hours_filled = nat
        .iter()
        .filter(|r| r.and_then(|r| r.gas_price_eur_mwh).is_none())
        .count();
    report.interpolated.insert("gas_price_eur_mwh".into(), gas_hours_filled);
    if gas_days_filled > 0 {
        report.warnings.push(format!("{gas_days_filled} gas-price days interpolated"));
    }

    let national_out: Vec<NationalHourlyRecord> = (0..hours)
        .map(|i| NationalHourlyRecord {
            timestamp: timestamps[i],
            redispatch_cost_eur: cost[i],
            da_price_eur_mwh: price[i],
            gas_price_eur_mwh: gas_of[&dates[i]],
        })
        .collect();
    let mut zonal_out = Vec::with_capacity(hours * ZoneId::COUNT);
    for (i, t) in timestamps.iter().enumerate() {
        for zone in ZoneId::ALL {
            let f = filled_zonal[zone.index()][i];
            zonal_out.push(HourlyZonalRecord::from_fields(*t, zone, f.map(Some)));
        }
    }

    report.national_rows = national_out.len();
    report.zonal_rows = zonal_out.len();
    report.naive_hour_count = days.len() * 24;
    report.total_interpolated = report.interpolated.values().sum();
    for w in &report.warnings {
        log::warn!("{w}");
    }

    Ok(MarketDataset {
        zonal: zonal_out,
        national: national_out,
        holidays,
        timezone: tz,
        winter_months: config.winter_months.clone(),
        report,
    })
}

/// National row before gap handling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNational {
    pub timestamp: DateTime<Utc>,
    pub redispatch_cost_eur: Option<f64>,
    pub da_price_eur_mwh: Option<f64>,
    pub gas_price_eur_mwh: Option<f64>,
}

impl From<&NationalHourlyRecord> for RawNational {
    fn from(r: &NationalHourlyRecord) -> Self {
        Self {
            timestamp: r.timestamp,
            redispatch_cost_eur: Some(r.redispatch_cost_eur),
            da_price_eur_mwh: Some(r.da_price_eur_mwh),
            gas_price_eur_mwh: Some(r.gas_price_eur_mwh),
        }
    }
}

fn declared_timezone(text: &str, path: &Path) -> Result<Tz> {
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.trim_start().strip_prefix('#') else { break };
        if let Some(name) = comment.trim().strip_prefix("timezone:") {
            return name.trim().parse::<Tz>().map_err(|e| Error::Parse {
                path: path.into(),
                line: i as u64 + 1,
                message: format!("unknown timezone: {e}"),
            });
        }
    }
    Ok(Tz::UTC)
}

fn localize(tz: Tz, naive: NaiveDateTime, used: &mut HashSet<DateTime<Utc>>) -> Option<DateTime<Utc>> {
    match tz.from_local_datetime(&naive) {
        LocalResult::Single(t) => Some(t.with_timezone(&Utc)),
        // Repeated hour at the end of daylight saving: first occurrence, then the second.
        LocalResult::Ambiguous(a, b) => {
            let a = a.with_timezone(&Utc);
            Some(if used.insert(a) { a } else { b.with_timezone(&Utc) })
        }
        LocalResult::None => None,
    }
}

struct TimestampParser {
    tz: Tz,
    used: HashSet<DateTime<Utc>>,
}

impl TimestampParser {
    fn parse(&mut self, s: &str) -> std::result::Result<DateTime<Utc>, String> {
        let s = s.trim();
        let t = if let Ok(t) = DateTime::parse_from_rfc3339(s) {
            t.with_timezone(&Utc)
        } else {
            let naive = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
                .ok_or_else(|| format!("invalid timestamp `{s}`"))?;
            localize(self.tz, naive, &mut self.used)
                .ok_or_else(|| format!("local time `{s}` does not exist in {}", self.tz))?
        };
        if t.timestamp() % 3600 != 0 {
            return Err(format!("timestamp `{s}` is not on the hour"));
        }
        Ok(t)
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], path: &Path) -> Result<()> {
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            path: path.into(),
            line: header.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn parse_cell(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("invalid number `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{s}`"));
    }
    Ok(Some(v))
}

pub fn parse_zonal_csv(text: &str, path: &Path) -> Result<Vec<HourlyZonalRecord>> {
    let mut ts = TimestampParser { tz: declared_timezone(text, path)?, used: HashSet::new() };
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &ZONAL_HEADER, path)?;
    let mut out = Vec::new();
    let mut used_per_zone: Vec<HashSet<DateTime<Utc>>> = vec![HashSet::new(); ZoneId::COUNT];
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { path: path.into(), line, message };
        if row.len() != ZONAL_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", ZONAL_HEADER.len(), row.len())));
        }
        let zone: ZoneId = row[1].parse().map_err(err)?;
        // Ambiguous local hours repeat once per zone.
        std::mem::swap(&mut ts.used, &mut used_per_zone[zone.index()]);
        let timestamp = ts.parse(&row[0]);
        std::mem::swap(&mut ts.used, &mut used_per_zone[zone.index()]);
        let timestamp = timestamp.map_err(err)?;
        let mut f = [None; HourlyZonalRecord::FIELD_COUNT];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = parse_cell(&row[k + 2]).map_err(err)?;
            // Everything except net imports is a non-negative quantity.
            if k < 7 {
                if let Some(v) = *slot {
                    if v < 0.0 {
                        return Err(err(format!("{} must be non-negative, found {v}", ZONAL_HEADER[k + 2])));
                    }
                }
            }
        }
        out.push(HourlyZonalRecord::from_fields(timestamp, zone, f));
    }
    Ok(out)
}

pub fn parse_national_csv(text: &str, path: &Path) -> Result<Vec<RawNational>> {
    let mut ts = TimestampParser { tz: declared_timezone(text, path)?, used: HashSet::new() };
    let mut rdr = csv_reader(text);
    check_header(&mut rdr, &NATIONAL_HEADER, path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { path: path.into(), line, message };
        if row.len() != NATIONAL_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", NATIONAL_HEADER.len(), row.len())));
        }
        let timestamp = ts.parse(&row[0]).map_err(err)?;
        let cost = parse_cell(&row[1]).map_err(err)?;
        let price = parse_cell(&row[2]).map_err(err)?;
        let gas = parse_cell(&row[3]).map_err(err)?;
        if price.is_some_and(|p| p < 0.0) {
            return Err(err("da_price_eur_mwh must be non-negative".into()));
        }
        if gas.is_some_and(|g| g <= 0.0) {
            return Err(err("gas_price_eur_mwh must be positive".into()));
        }
        out.push(RawNational {
            timestamp,
            redispatch_cost_eur: cost,
            da_price_eur_mwh: price,
            gas_price_eur_mwh: gas,
        });
    }
    Ok(out)
}

pub(crate) fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_zonal_csv<W: Write>(records: &[HourlyZonalRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ZONAL_HEADER)?;
    for r in records {
        let mut row = vec![format_timestamp(r.timestamp), r.zone.to_string()];
        row.extend(r.fields().iter().map(|v| cell(*v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("writing zonal csv", e))?;
    Ok(())
}

pub fn write_national_csv<W: Write>(records: &[NationalHourlyRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(NATIONAL_HEADER)?;
    for r in records {
        wtr.write_record([
            format_timestamp(r.timestamp),
            r.redispatch_cost_eur.to_string(),
            r.da_price_eur_mwh.to_string(),
            r.gas_price_eur_mwh.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("writing national csv", e))?;
    Ok(())
}

pub fn write_holidays<W: Write>(holidays: &BTreeSet<NaiveDate>, mut w: W) -> Result<()> {
    for d in holidays {
        writeln!(w, "{d}").map_err(|e| Error::io("writing holidays", e))?;
    }
    Ok(())
}

/// Writes the dataset in the same schemas `load_dataset` reads.
pub fn write_dataset(
    ds: &MarketDataset,
    zonal_path: impl AsRef<Path>,
    national_path: impl AsRef<Path>,
    holidays_path: impl AsRef<Path>,
) -> Result<()> {
    let create = |p: &Path| {
        std::fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(format!("creating {}", p.display()), e))
    };
    write_zonal_csv(&ds.zonal, create(zonal_path.as_ref())?)?;
    write_national_csv(&ds.national, create(national_path.as_ref())?)?;
    let mut h = create(holidays_path.as_ref())?;
    write_holidays(&ds.holidays, &mut h)?;
    h.flush().map_err(|e| Error::io("writing holidays", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn day_csvs(solar_gap_hour: Option<usize>) -> (String, String) {
        let mut zonal = ZONAL_HEADER.join(",") + "\n";
        let mut national = NATIONAL_HEADER.join(",") + "\n";
        for h in 0..24 {
            let ts = format!("2019-06-03T{h:02}:00:00Z");
            for zone in ZoneId::ALL {
                let solar = if h == 11 { 100.0 } else if h == 13 { 200.0 } else { 50.0 };
                let solar = if solar_gap_hour == Some(h) && zone == ZoneId::South {
                    String::new()
                } else {
                    solar.to_string()
                };
                zonal += &format!("{ts},{zone},1000,1010,{solar},60,20,25,5,-3\n");
            }
            national += &format!("{ts},150000,50,20\n");
        }
        (zonal, national)
    }

    fn load_strings(zonal: &str, national: &str, config: &IngestConfig) -> Result<MarketDataset> {
        let z = parse_zonal_csv(zonal, Path::new("zonal.csv"))?;
        let n = parse_national_csv(national, Path::new("national.csv"))?;
        assemble(z, n, BTreeSet::new(), config)
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate_gaps(&[Some(10.0), None, None, Some(40.0)], 6).unwrap(), vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(interpolate_gaps(&[Some(0.0), None, Some(1.0)], 6).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(interpolate_gaps(&[Some(1.0), Some(2.0)], 6).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn interpolation_errors() {
        assert!(matches!(interpolate_gaps(&[None, Some(1.0)], 6), Err(Error::Boundary { side: "leading", .. })));
        assert!(matches!(interpolate_gaps(&[Some(1.0), None], 6), Err(Error::Boundary { side: "trailing", .. })));
        let long: Vec<_> = std::iter::once(Some(0.0)).chain(vec![None; 7]).chain([Some(1.0)]).collect();
        assert!(matches!(interpolate_gaps(&long, 6), Err(Error::Gap { length: 7, .. })));
        assert!(interpolate_gaps(&long, 7).is_ok());
    }

    proptest! {
        #[test]
        fn interpolation_is_idempotent(values in prop::collection::vec(prop::option::weighted(0.7, -1e4f64..1e4), 2..60)) {
            let mut v = values;
            let n = v.len();
            v[0] = Some(1.0);
            v[n - 1] = Some(2.0);
            let once = interpolate_gaps(&v, usize::MAX).unwrap();
            let twice = interpolate_gaps(&once.iter().copied().map(Some).collect::<Vec<_>>(), usize::MAX).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in v.iter().zip(&once) {
                if let Some(a) = a { prop_assert_eq!(a, b); }
            }
        }
    }

    #[test]
    fn calendar_examples() {
        let holidays: BTreeSet<_> = [d(2019, 1, 1)].into_iter().collect();
        let wm = WinterMonths::default();
        assert!(!calendar_flags(d(2019, 6, 1), &holidays, &wm).workday);
        assert!(!calendar_flags(d(2019, 1, 1), &holidays, &wm).workday);
        assert!(calendar_flags(d(2019, 1, 2), &holidays, &wm).workday);
        assert!(!calendar_flags(d(2019, 7, 10), &holidays, &wm).winter);
        assert!(calendar_flags(d(2019, 10, 10), &holidays, &wm).winter);
        assert!(!calendar_flags(d(2019, 10, 10), &holidays, &WinterMonths::december_to_april()).winter);
        assert!(WinterMonths::new([]).is_err());
    }

    #[test]
    fn calendar_uses_local_day() {
        // 23:00 UTC on Friday is already Saturday in Rome.
        let t = Utc.with_ymd_and_hms(2019, 5, 31, 23, 0, 0).unwrap();
        let flags = annotate_calendar(&[t], &BTreeSet::new(), &WinterMonths::default(), chrono_tz::Europe::Rome).unwrap();
        assert!(!flags[0].workday);
        let flags = annotate_calendar(&[t], &BTreeSet::new(), &WinterMonths::default(), Tz::UTC).unwrap();
        assert!(flags[0].workday);
    }

    #[test]
    fn complete_day_loads_without_interpolation() {
        let (z, n) = day_csvs(None);
        let ds = load_strings(&z, &n, &IngestConfig::default()).unwrap();
        assert_eq!(ds.national.len(), 24);
        assert_eq!(ds.zonal.len(), 168);
        assert_eq!(ds.report.total_interpolated, 0);
        assert_eq!(ds.report.naive_hour_count, 24);
        for h in 0..24 {
            let zs = ds.zonal_hour(h);
            assert_eq!(zs.len(), 7);
            assert!(zs.iter().all(|r| r.timestamp == ds.national[h].timestamp));
        }
    }

    #[test]
    fn missing_solar_cell_is_midpoint() {
        let (z, n) = day_csvs(Some(12));
        let ds = load_strings(&z, &n, &IngestConfig::default()).unwrap();
        let south = ds.zonal_hour(12)[ZoneId::South.index()].clone();
        assert_eq!(south.solar_mwh, Some(150.0));
        assert_eq!(ds.report.interpolated["solar_mwh"], 1);
        assert_eq!(ds.report.total_interpolated, 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let (z, n) = day_csvs(None);
        let mut lines: Vec<String> = z.lines().map(String::from).collect();
        lines[5] = lines[5].replace("1000", "abc");
        let bad = lines.join("\n");
        match parse_zonal_csv(&bad, Path::new("z.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        let _ = n;
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let (z, n) = day_csvs(None);
        let dup = z.clone() + z.lines().nth(1).unwrap() + "\n";
        assert!(matches!(load_strings(&dup, &n, &IngestConfig::default()), Err(Error::Duplicate { .. })));
    }

    #[test]
    fn long_gap_aborts() {
        let (z, n) = day_csvs(None);
        let z: String = z
            .lines()
            .filter(|l| !(l.contains("North,") && (l.contains("T05:") || l.contains("T06:") || l.contains("T07:") || l.contains("T08:") || l.contains("T09:") || l.contains("T10:") || l.contains("T11:"))))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = load_strings(&z, &n, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Gap { length: 7, .. }), "{err}");
        let cfg = IngestConfig { max_gap: 7, ..Default::default() };
        let ds = load_strings(&z, &n, &cfg).unwrap();
        assert_eq!(ds.zonal.len(), 168);
    }

    #[test]
    fn gas_is_daily_and_interpolated_per_day() {
        let mut national = NATIONAL_HEADER.join(",") + "\n";
        for day in 1..=3 {
            for h in 0..24 {
                let gas = match day {
                    1 => "10",
                    2 => "",
                    _ => "30",
                };
                national += &format!("2019-06-0{day}T{h:02}:00:00Z,1,50,{gas}\n");
            }
        }
        let mut zonal = ZONAL_HEADER.join(",") + "\n";
        for day in 1..=3 {
            for h in 0..24 {
                for zone in ZoneId::ALL {
                    zonal += &format!("2019-06-0{day}T{h:02}:00:00Z,{zone},1,1,0,0,0,0,0,0\n");
                }
            }
        }
        let ds = load_strings(&zonal, &national, &IngestConfig::default()).unwrap();
        assert!(ds.national[24..48].iter().all(|r| r.gas_price_eur_mwh == 20.0));
        for day in ds.national.chunks(24) {
            assert!(day.iter().all(|r| r.gas_price_eur_mwh == day[0].gas_price_eur_mwh));
        }
        assert_eq!(ds.report.interpolated["gas_price_eur_mwh"], 24);
    }

    #[test]
    fn local_timestamps_use_declared_timezone() {
        let text = "# timezone: Europe/Rome\n".to_string()
            + &NATIONAL_HEADER.join(",")
            + "\n2019-06-03 02:00:00,1,50,20\n";
        let rows = parse_national_csv(&text, Path::new("n.csv")).unwrap();
        assert_eq!(rows[0].timestamp, Utc.with_ymd_and_hms(2019, 6, 3, 0, 0, 0).unwrap());
    }

    #[test]
    fn fall_back_hour_maps_to_both_instants() {
        let text = "# timezone: Europe/Rome\n".to_string()
            + &NATIONAL_HEADER.join(",")
            + "\n2019-10-27 02:00:00,1,50,20\n2019-10-27 02:00:00,1,50,20\n";
        let rows = parse_national_csv(&text, Path::new("n.csv")).unwrap();
        assert_eq!((rows[1].timestamp - rows[0].timestamp).num_hours(), 1);
    }

    #[test]
    fn negative_demand_is_rejected() {
        let text = ZONAL_HEADER.join(",") + "\n2019-01-01T00:00:00Z,North,-1,1,0,0,0,0,0,0\n";
        assert!(matches!(parse_zonal_csv(&text, Path::new("z")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let text = "timestamp,zone\n";
        assert!(matches!(parse_zonal_csv(text, Path::new("z")), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn date_range_restricts_rows() {
        let (z, n) = day_csvs(None);
        let cfg = IngestConfig { start: Some(d(2019, 6, 3)), end: Some(d(2019, 6, 3)), ..Default::default() };
        let ds = load_strings(&z, &n, &cfg).unwrap();
        assert_eq!(ds.hours(), 24);
        let cfg = IngestConfig { start: Some(d(2019, 6, 2)), end: Some(d(2019, 6, 3)), ..Default::default() };
        assert!(matches!(load_strings(&z, &n, &cfg), Err(Error::Boundary { .. }) | Err(Error::Completeness(_))));
    }

    #[test]
    fn writer_round_trips_canonical_files() {
        let (z, n) = day_csvs(None);
        let ds = load_strings(&z, &n, &IngestConfig::default()).unwrap();
        let mut zb = Vec::new();
        let mut nb = Vec::new();
        write_zonal_csv(&ds.zonal, &mut zb).unwrap();
        write_national_csv(&ds.national, &mut nb).unwrap();
        let (zs, ns) = (String::from_utf8(zb).unwrap(), String::from_utf8(nb).unwrap());
        assert_eq!(zs, z);
        assert_eq!(ns, n);
    }
}
