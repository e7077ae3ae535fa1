//! Research-design partitions: an in-sample period split 70:30 by day into
//! training and validation folds, and two out-of-sample windows
//! (pre-lockdown and lockdown).

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies the day-permutation algorithm stored in serialized plans.
pub const SPLIT_ALGORITHM: &str = "chacha8-fisher-yates-v1";

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Range(format!("empty date range {start} .. {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn ymd(start: (i32, u32, u32), end: (i32, u32, u32)) -> Self {
        let d = |(y, m, day): (i32, u32, u32)| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self { start: d(start), end: d(end) }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }

    pub fn len_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn intersects(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Train,
    Validation,
    PreLockdown,
    Lockdown,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub algorithm: String,
    pub seed: u64,
    pub ratio: f64,
    pub in_sample: DateRange,
    pub train_days: BTreeSet<NaiveDate>,
    pub validation_days: BTreeSet<NaiveDate>,
    pub oos_pre_lockdown: DateRange,
    pub oos_lockdown: DateRange,
}

impl SplitPlan {
    pub fn default_in_sample() -> DateRange {
        DateRange::ymd((2017, 1, 1), (2019, 12, 31))
    }

    pub fn default_pre_lockdown() -> DateRange {
        DateRange::ymd((2020, 1, 1), (2020, 3, 7))
    }

    pub fn default_lockdown() -> DateRange {
        DateRange::ymd((2020, 3, 8), (2020, 4, 26))
    }

    pub fn fold_of(&self, date: NaiveDate) -> Fold {
        if self.train_days.contains(&date) {
            Fold::Train
        } else if self.validation_days.contains(&date) {
            Fold::Validation
        } else if self.oos_pre_lockdown.contains(date) {
            Fold::PreLockdown
        } else if self.oos_lockdown.contains(date) {
            Fold::Lockdown
        } else {
            Fold::Unassigned
        }
    }

    /// Replaces the out-of-sample windows; they may not overlap the in-sample range.
    pub fn with_out_of_sample(mut self, pre_lockdown: DateRange, lockdown: DateRange) -> Result<Self> {
        for w in [&pre_lockdown, &lockdown] {
            if w.intersects(&self.in_sample) {
                return Err(Error::Range(format!(
                    "out-of-sample window {} .. {} overlaps the in-sample range",
                    w.start, w.end
                )));
            }
        }
        self.oos_pre_lockdown = pre_lockdown;
        self.oos_lockdown = lockdown;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Uniform integer in `0..n` by rejection sampling.
fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % n;
        }
    }
}

pub fn make_split(in_sample: DateRange, ratio: f64, seed: u64) -> Result<SplitPlan> {
    make_split_with_windows(
        in_sample,
        ratio,
        seed,
        SplitPlan::default_pre_lockdown(),
        SplitPlan::default_lockdown(),
    )
}

pub fn make_split_with_windows(
    in_sample: DateRange,
    ratio: f64,
    seed: u64,
    pre_lockdown: DateRange,
    lockdown: DateRange,
) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Range(format!("split ratio {ratio} outside (0, 1)")));
    }
    if in_sample.end < in_sample.start {
        return Err(Error::Range("empty in-sample range".into()));
    }
    let mut days: Vec<NaiveDate> = in_sample.days().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..days.len()).rev() {
        let j = below(&mut rng, i as u64 + 1) as usize;
        days.swap(i, j);
    }
    let n_train = (ratio * days.len() as f64).floor() as usize;
    let validation = days.split_off(n_train);
    SplitPlan {
        algorithm: SPLIT_ALGORITHM.to_string(),
        seed,
        ratio,
        in_sample,
        train_days: days.into_iter().collect(),
        validation_days: validation.into_iter().collect(),
        oos_pre_lockdown: pre_lockdown,
        oos_lockdown: lockdown,
    }
    .with_out_of_sample(pre_lockdown, lockdown)
}

/// Re-splits a single calendar year of the original in-sample range.
pub fn restrict_in_sample(plan: &SplitPlan, year: i32) -> Result<SplitPlan> {
    let start = NaiveDate::from_ymd_opt(year, 1, 1).ok_or_else(|| Error::Range(format!("invalid year {year}")))?;
    let end = NaiveDate::from_ymd_opt(year, 12, 31).unwrap();
    let range = DateRange { start: start.max(plan.in_sample.start), end: end.min(plan.in_sample.end) };
    if range.end < range.start {
        return Err(Error::Range(format!(
            "year {year} lies outside the in-sample range {} .. {}",
            plan.in_sample.start, plan.in_sample.end
        )));
    }
    make_split_with_windows(range, plan.ratio, plan.seed, plan.oos_pre_lockdown, plan.oos_lockdown)
}
