//! Run configuration, read from TOML. Every field has a default, so an
//! empty file is a valid config.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::market_data::{IngestConfig, WinterMonths};
use crate::mlp::MlpConfig;
use crate::scenarios::{ScenarioKind, ScenarioSpec};
use crate::splits::{DateRange, SplitPlan};
use crate::synth::GeneratorConfig;
use crate::tuner::{SearchSpace, TunerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub zonal: PathBuf,
    pub national: PathBuf,
    pub holidays: PathBuf,
    /// Output directory; `--out` overrides.
    pub out: PathBuf,
    /// Model read by `evaluate` and `scenario`; defaults to `<out>/model.json`.
    pub model: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            zonal: "data/zonal.csv".into(),
            national: "data/national.csv".into(),
            holidays: "data/holidays.txt".into(),
            out: "out".into(),
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub max_gap: usize,
    /// IANA name for naive timestamps and calendar days.
    pub timezone: String,
    pub winter_months: Vec<u32>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            max_gap: 6,
            timezone: "UTC".into(),
            winter_months: WinterMonths::default().months().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub ratio: f64,
    pub in_sample: DateRange,
    pub pre_lockdown: DateRange,
    pub lockdown: DateRange,
    /// Keep only this year of the in-sample period.
    pub restrict_year: Option<i32>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: 0.7,
            in_sample: SplitPlan::default_in_sample(),
            pre_lockdown: SplitPlan::default_pre_lockdown(),
            lockdown: SplitPlan::default_lockdown(),
            restrict_year: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Network with the `[model.mlp]` settings.
    #[default]
    Mlp,
    /// Network with settings chosen by the tuner.
    MlpTuned,
    /// Least squares on the `[features]` basis.
    Ols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub mlp: MlpConfig,
    /// Fit OLS on a seeded subsample of at most this many rows.
    pub ols_max_rows: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Mlp, mlp: MlpConfig { seed: 42, ..MlpConfig::reference() }, ols_max_rows: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunerSection {
    pub space: SearchSpace,
    pub max_epochs_per_trial: usize,
    pub eta: usize,
    pub final_max_epochs: usize,
}

impl Default for TunerSection {
    fn default() -> Self {
        let t = TunerConfig::default();
        Self {
            space: t.space,
            max_epochs_per_trial: t.max_epochs_per_trial,
            eta: t.eta,
            final_max_epochs: t.final_max_epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub kind: ScenarioKind,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSection {
    pub evaluation_range: DateRange,
    pub runs: Vec<ScenarioEntry>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            evaluation_range: ScenarioSpec::new(ScenarioKind::Scale, 2.0).evaluation_range,
            runs: ScenarioKind::ALL.iter().map(|&kind| ScenarioEntry { kind, factor: 2.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seeds the split and the tuner. `--seed` also overrides the model and generator seeds.
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub features: FeatureSpec,
    pub model: ModelConfig,
    pub tuner: TunerSection,
    pub scenarios: ScenarioSection,
    pub synth: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            split: SplitConfig::default(),
            features: FeatureSpec::preferred(),
            model: ModelConfig::default(),
            tuner: TunerSection::default(),
            scenarios: ScenarioSection::default(),
            synth: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies a seed to every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.model.mlp.seed = seed;
        self.synth.seed = seed;
        self
    }

    pub fn ingest_config(&self) -> Result<IngestConfig> {
        let timezone: Tz = self
            .data
            .timezone
            .parse()
            .map_err(|e| Error::Config(format!("unknown timezone {:?}: {e}", self.data.timezone)))?;
        Ok(IngestConfig {
            start: self.data.start,
            end: self.data.end,
            max_gap: self.data.max_gap,
            timezone,
            winter_months: WinterMonths::new(self.data.winter_months.iter().copied())
                .map_err(|e| Error::Config(e.to_string()))?,
        })
    }

    pub fn tuner_config(&self) -> TunerConfig {
        TunerConfig {
            space: self.tuner.space.clone(),
            max_epochs_per_trial: self.tuner.max_epochs_per_trial,
            eta: self.tuner.eta,
            final_max_epochs: self.tuner.final_max_epochs,
            seed: self.seed,
            base: self.model.mlp.clone(),
        }
    }

    pub fn scenario_specs(&self) -> Vec<ScenarioSpec> {
        self.scenarios
            .runs
            .iter()
            .map(|r| ScenarioSpec { kind: r.kind, factor: r.factor, evaluation_range: self.scenarios.evaluation_range })
            .collect()
    }
}
