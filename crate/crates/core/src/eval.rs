//! Out-of-sample evaluation: RMSE, Wilcoxon signed-rank, empirical
//! quantiles and the constant-offset prediction band.
//!
//! Errors are `predicted - actual`, so a negative error is an underestimate.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::market_data::format_timestamp;
use crate::splits::DateRange;

pub const QUANTILE_METHOD: &str = "linear interpolation between order statistics at position (n-1)q";
pub const EXACT_WILCOXON_MAX_N: usize = 20;

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape { expected: actual.len(), actual: predicted.len() });
    }
    if actual.is_empty() {
        return Err(Error::Range("rmse of an empty sequence".into()));
    }
    let ss: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok((ss / actual.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMode {
    #[default]
    Asymptotic,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub mode: WilcoxonMode,
    /// Non-zero differences entering the test.
    pub n: usize,
    /// Sum of ranks of positive differences.
    pub w: f64,
    /// Normal-approximation statistic without continuity correction, reported in both modes.
    pub z: f64,
    pub p_value: f64,
}

/// Average ranks (1-based) of `xs`, plus tie group sizes.
fn average_ranks(xs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Paired signed-rank test on `a - b`, two-sided.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], mode: WilcoxonMode) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: a.len(), actual: b.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Range("non-finite paired difference".into()));
    }
    let n = d.len();
    if n == 0 {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = if var > 0.0 { (w - mean) / var.sqrt() } else { 0.0 };

    let p_value = match mode {
        WilcoxonMode::Asymptotic => {
            // Half-unit continuity correction on the p-value only; `z` stays
            // the plain standardized statistic.
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let corrected = if var > 0.0 { ((w - mean).abs() - 0.5).max(0.0) / var.sqrt() } else { 0.0 };
            (2.0 * normal.sf(corrected)).min(1.0)
        }
        WilcoxonMode::Exact => {
            if n > EXACT_WILCOXON_MAX_N {
                return Err(Error::Range(format!(
                    "exact enumeration supports at most {EXACT_WILCOXON_MAX_N} non-zero differences, got {n}"
                )));
            }
            // Doubled ranks are integers, so the comparison is exact.
            let r2: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
            let total: i64 = r2.iter().sum();
            let observed = (2 * (2.0 * w).round() as i64 - total).abs();
            let mut extreme = 0u64;
            for pattern in 0u32..(1u32 << n) {
                let s: i64 = (0..n).filter(|&i| pattern >> i & 1 == 1).map(|i| r2[i]).sum();
                if (2 * s - total).abs() >= observed {
                    extreme += 1;
                }
            }
            extreme as f64 / (1u64 << n) as f64
        }
    };
    Ok(WilcoxonResult { mode, n, w, z, p_value })
}

pub fn empirical_quantile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Range("quantile of an empty sequence".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Range(format!("quantile level {q} outside [0, 1]")));
    }
    if xs.iter().any(|v| v.is_nan()) {
        return Err(Error::Range("quantile input contains NaN".into()));
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = (s.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let frac = pos - lo as f64;
    Ok(s[lo] + frac * (s[hi] - s[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandOffsets {
    /// Subtracted from the prediction: Q(errors, 0.975).
    pub lower: f64,
    /// Added to the prediction: |Q(errors, 0.025)|.
    pub upper: f64,
}

impl BandOffsets {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        Ok(Self { lower: empirical_quantile(errors, 0.975)?, upper: empirical_quantile(errors, 0.025)?.abs() })
    }

    pub fn bounds(&self, predicted: f64) -> (f64, f64) {
        (predicted - self.lower, predicted + self.upper)
    }
}

/// Per-hour `(lower, upper)` around each point prediction.
pub fn prediction_band(errors_pre_lockdown: &[f64], predictions: &[f64]) -> Result<Vec<(f64, f64)>> {
    let band = BandOffsets::from_errors(errors_pre_lockdown)?;
    Ok(predictions.iter().map(|p| band.bounds(*p)).collect())
}

/// Fraction of hours whose actual lies inside the band; NaN when empty.
pub fn band_coverage<'a>(hours: impl IntoIterator<Item = &'a HourPrediction>, band: &BandOffsets) -> f64 {
    let (inside, n) = hours.into_iter().fold((0usize, 0usize), |(k, n), h| {
        let (lo, hi) = band.bounds(h.predicted);
        (k + usize::from(lo <= h.actual && h.actual <= hi), n + 1)
    });
    inside as f64 / n as f64
}

/// One hour of model output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourPrediction {
    pub timestamp: DateTime<Utc>,
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedWindow {
    pub name: String,
    pub range: DateRange,
}

impl NamedWindow {
    pub fn new(name: impl Into<String>, range: DateRange) -> Self {
        Self { name: name.into(), range }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub name: String,
    pub range: DateRange,
    pub hours: usize,
    pub mean_actual: f64,
    pub mean_predicted: f64,
    pub mean_error: f64,
    /// mean actual / mean predicted - 1.
    pub ratio_actual_over_predicted: f64,
    /// Mean error relative to mean predicted.
    pub percent_error: f64,
    pub rmse: f64,
    pub error_q025: f64,
    pub error_q975: f64,
    /// `None` when every error is zero.
    pub wilcoxon: Option<WilcoxonResult>,
    pub wilcoxon_degenerate: bool,
    /// Fraction of actuals inside the band.
    pub band_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyEvaluation {
    pub timestamp: DateTime<Utc>,
    pub window: String,
    pub actual: f64,
    pub predicted: f64,
    pub error: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub quantile_method: String,
    /// Window whose errors define the band.
    pub band_window: String,
    pub band: BandOffsets,
    pub windows: Vec<WindowSummary>,
    #[serde(skip)]
    pub hours: Vec<HourlyEvaluation>,
}

fn window_rows<'a>(rows: &'a [HourPrediction], w: &NamedWindow) -> Result<Vec<&'a HourPrediction>> {
    let sel: Vec<&HourPrediction> = rows.iter().filter(|r| w.range.contains(r.date)).collect();
    let coverage = |detail: String| Error::Coverage { window: w.name.clone(), detail };
    let (first, last) = match (sel.first(), sel.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(coverage("no predictions".into())),
    };
    if first.date != w.range.start || last.date != w.range.end {
        return Err(coverage(format!("predictions span {} to {}", first.date, last.date)));
    }
    if let Some(pair) = sel.windows(2).find(|p| p[1].timestamp - p[0].timestamp != Duration::hours(1)) {
        return Err(coverage(format!("missing hours after {}", format_timestamp(pair[0].timestamp))));
    }
    Ok(sel)
}

fn summarize(name: &str, range: DateRange, rows: &[&HourPrediction], band: &BandOffsets) -> Result<WindowSummary> {
    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.predicted - r.actual).collect();
    let n = rows.len() as f64;
    let mean_actual = actual.iter().sum::<f64>() / n;
    let mean_predicted = predicted.iter().sum::<f64>() / n;
    let mean_error = errors.iter().sum::<f64>() / n;
    let (wilcoxon, wilcoxon_degenerate) = match wilcoxon_signed_rank(&predicted, &actual, WilcoxonMode::Asymptotic) {
        Ok(w) => (Some(w), false),
        Err(Error::Degenerate(_)) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(WindowSummary {
        name: name.to_string(),
        range,
        hours: rows.len(),
        mean_actual,
        mean_predicted,
        mean_error,
        ratio_actual_over_predicted: mean_actual / mean_predicted - 1.0,
        percent_error: mean_error / mean_predicted,
        rmse: rmse(&actual, &predicted)?,
        error_q025: empirical_quantile(&errors, 0.025)?,
        error_q975: empirical_quantile(&errors, 0.975)?,
        wilcoxon,
        wilcoxon_degenerate,
        band_coverage: band_coverage(rows.iter().copied(), band),
    })
}

/// Summaries per window; the band comes from the errors of `band_window`,
/// which must be one of `windows`.
pub fn summarize_windows(rows: &[HourPrediction], windows: &[NamedWindow], band_window: &str) -> Result<EvaluationReport> {
    let selected: Vec<Vec<&HourPrediction>> = windows.iter().map(|w| window_rows(rows, w)).collect::<Result<_>>()?;
    let band_idx = windows
        .iter()
        .position(|w| w.name == band_window)
        .ok_or_else(|| Error::Spec(format!("band window {band_window:?} is not among the evaluated windows")))?;
    let band_errors: Vec<f64> = selected[band_idx].iter().map(|r| r.predicted - r.actual).collect();
    let band = BandOffsets::from_errors(&band_errors)?;

    let mut summaries = Vec::with_capacity(windows.len());
    let mut hours = Vec::new();
    for (w, sel) in windows.iter().zip(&selected) {
        summaries.push(summarize(&w.name, w.range, sel, &band)?);
        hours.extend(sel.iter().map(|r| {
            let (lower, upper) = band.bounds(r.predicted);
            HourlyEvaluation {
                timestamp: r.timestamp,
                window: w.name.clone(),
                actual: r.actual,
                predicted: r.predicted,
                error: r.predicted - r.actual,
                lower,
                upper,
            }
        }));
    }
    Ok(EvaluationReport {
        quantile_method: QUANTILE_METHOD.to_string(),
        band_window: band_window.to_string(),
        band,
        windows: summaries,
        hours,
    })
}

impl EvaluationReport {
    pub fn window(&self, name: &str) -> Option<&WindowSummary> {
        self.windows.iter().find(|w| w.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-hour series: timestamp, window, actual, predicted, error, lower, upper.
    pub fn write_hourly_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["timestamp", "window", "actual", "predicted", "error", "lower", "upper"])?;
        for h in &self.hours {
            wtr.write_record([
                format_timestamp(h.timestamp),
                h.window.clone(),
                h.actual.to_string(),
                h.predicted.to_string(),
                h.error.to_string(),
                h.lower.to_string(),
                h.upper.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("writing hourly evaluation", e))?;
        Ok(())
    }

    /// Daily totals of actual, predicted and band bounds.
    pub fn write_daily_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut days: BTreeMap<(String, NaiveDate), [f64; 4]> = BTreeMap::new();
        for h in &self.hours {
            let e = days.entry((h.window.clone(), h.timestamp.date_naive())).or_default();
            e[0] += h.actual;
            e[1] += h.predicted;
            e[2] += h.lower;
            e[3] += h.upper;
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["window", "date", "actual", "predicted", "lower", "upper"])?;
        for ((window, date), v) in days {
            wtr.write_record([
                window,
                date.to_string(),
                v[0].to_string(),
                v[1].to_string(),
                v[2].to_string(),
                v[3].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("writing daily evaluation", e))?;
        Ok(())
    }

    /// Error histogram per window with `bins` equal-width bins over the pooled range.
    pub fn write_histogram_csv<W: Write>(&self, w: W, bins: usize) -> Result<()> {
        let bins = bins.max(1);
        let (lo, hi) = self
            .hours
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| (lo.min(h.error), hi.max(h.error)));
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["window", "bin_lower", "bin_upper", "count"])?;
        for s in &self.windows {
            let mut counts = vec![0usize; bins];
            for h in self.hours.iter().filter(|h| h.window == s.name) {
                let k = (((h.error - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
            for (k, c) in counts.iter().enumerate() {
                let a = lo + k as f64 * width;
                wtr.write_record([s.name.clone(), a.to_string(), (a + width).to_string(), c.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("writing error histogram", e))?;
        Ok(())
    }
}
