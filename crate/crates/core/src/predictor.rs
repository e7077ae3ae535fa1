//! Common interface over fitted cost models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::HourPrediction;
use crate::features::{build_design_with_scaler, DesignMatrix, FeatureSpec};
use crate::linreg::OlsModel;
use crate::mlp::MlpModel;
use crate::net_demand::NetDemandPanel;

/// Anything that maps a net-demand panel to hourly business-as-usual costs.
pub trait CostPredictor: Sync {
    /// Predictions for every panel hour with a complete feature row.
    fn predict_panel(&self, panel: &NetDemandPanel) -> Result<Vec<HourPrediction>>;

    /// Feature specification the model was fitted on, if it uses one.
    fn feature_spec(&self) -> Option<&FeatureSpec> {
        None
    }
}

fn pair(design: &DesignMatrix, predicted: Vec<f64>) -> Vec<HourPrediction> {
    (0..design.y.len())
        .map(|i| HourPrediction {
            timestamp: design.timestamps[i],
            date: design.dates[i],
            actual: design.y[i],
            predicted: predicted[i],
        })
        .collect()
}

impl CostPredictor for MlpModel {
    fn predict_panel(&self, panel: &NetDemandPanel) -> Result<Vec<HourPrediction>> {
        let design = build_design_with_scaler(panel, &self.feature_spec, &self.scaler, None)?;
        let p = self.predict(&design)?;
        Ok(pair(&design, p))
    }

    fn feature_spec(&self) -> Option<&FeatureSpec> {
        Some(&self.feature_spec)
    }
}

impl CostPredictor for OlsModel {
    fn predict_panel(&self, panel: &NetDemandPanel) -> Result<Vec<HourPrediction>> {
        let design = build_design_with_scaler(panel, &self.feature_spec, &self.scaler, None)?;
        let p = self.predict(&design)?;
        Ok(pair(&design, p))
    }

    fn feature_spec(&self) -> Option<&FeatureSpec> {
        Some(&self.feature_spec)
    }
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Mlp(MlpModel),
    Ols(OlsModel),
}

impl SavedModel {
    pub fn predictor(&self) -> &dyn CostPredictor {
        match self {
            SavedModel::Mlp(m) => m,
            SavedModel::Ols(m) => m,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: SavedModel = serde_json::from_str(s)?;
        if let SavedModel::Mlp(inner) = &m {
            // Re-run the version and shape checks.
            MlpModel::from_json(&serde_json::to_string(inner)?)?;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&s)
    }
}
