//! Feed-forward network with two hidden layers, trained by RMSProp on
//! mean squared error with dropout and patience-based early stopping.

mod early_stopping;
mod network;
mod rmsprop;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use early_stopping::{EarlyStopping, Observation, StoppingRule};
pub use network::{parameter_count, Activation, BatchMasks, Network};
pub use rmsprop::{rmsprop_step, RmsProp};

use crate::error::{Error, Result};
use crate::features::{DesignMatrix, FeatureSpec, Scaler};
use crate::splits::Fold;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub n1: usize,
    pub n2: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Minibatch size; 0 trains full-batch.
    pub batch_size: usize,
    pub seed: u64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    /// Train on a standardized target; predictions and reported losses stay in EUR.
    pub standardize_target: bool,
    pub stopping: StoppingRule,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl MlpConfig {
    /// Known-good settings: ReLU, 48x48, learning rate 0.006161, dropout 0.1.
    pub fn reference() -> Self {
        Self {
            n1: 48,
            n2: 48,
            activation: Activation::Relu,
            dropout: 0.1,
            learning_rate: 0.006161,
            max_epochs: 1_500,
            patience: 5,
            batch_size: 32,
            seed: 0,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-7,
            standardize_target: false,
            stopping: StoppingRule::BestSoFar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.n1 == 0 || self.n2 == 0 {
            return fail(format!("hidden layer sizes must be positive, got {} and {}", self.n1, self.n2));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || self.rmsprop_epsilon < 0.0 {
            return fail("invalid RMSProp decay or epsilon".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaling {
    pub const IDENTITY: TargetScaling = TargetScaling { mean: 0.0, std: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch loss over the epoch (with dropout), EUR^2.
    pub train_mse: f64,
    /// Validation loss without dropout, EUR^2.
    pub validation_mse: f64,
}

/// Source of dropout multipliers during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Bernoulli inverted-dropout masks at the configured rate.
    Dropout,
    /// Every multiplier fixed at one.
    Ones,
}

/// A trained network together with everything needed to rebuild its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format_version: u32,
    pub config: MlpConfig,
    pub feature_spec: FeatureSpec,
    pub column_names: Vec<String>,
    pub scaler: Scaler,
    pub target: TargetScaling,
    pub network: Network,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub trace: Vec<EpochStats>,
}

impl MlpModel {
    pub fn parameter_count(&self) -> usize {
        self.network.parameter_count()
    }

    pub fn best_validation_mse(&self) -> f64 {
        self.trace
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .map_or(f64::INFINITY, |e| e.validation_mse)
    }

    /// Prediction for one standardized feature row, EUR.
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        Ok(self.network.forward(x)? * self.target.std + self.target.mean)
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.column_names != self.column_names {
            return Err(Error::Spec("design columns differ from the model's training columns".into()));
        }
        Ok(self
            .network
            .predict(&design.x)?
            .into_iter()
            .map(|v| v * self.target.std + self.target.mean)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MlpModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Spec(format!("unsupported model format version {}", m.format_version)));
        }
        if m.network.params.len() != parameter_count(m.network.input_dim, m.network.n1, m.network.n2) {
            return Err(Error::Spec("model parameter vector has the wrong length".into()));
        }
        Ok(m)
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,validation_mse\n");
        for e in &self.trace {
            out += &format!("{},{},{}\n", e.epoch, e.train_mse, e.validation_mse);
        }
        out
    }
}

pub fn train(design: &DesignMatrix, config: &MlpConfig) -> Result<MlpModel> {
    train_with_masks(design, config, MaskMode::Dropout)
}

pub fn train_with_masks(design: &DesignMatrix, config: &MlpConfig, masks: MaskMode) -> Result<MlpModel> {
    config.validate()?;
    let train_rows = design.rows_in(&[Fold::Train]);
    let val_rows = design.rows_in(&[Fold::Validation]);
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::Range(format!(
            "training needs both folds; got {} training and {} validation rows",
            train_rows.len(),
            val_rows.len()
        )));
    }

    let target = if config.standardize_target {
        let n = train_rows.len() as f64;
        let mean = train_rows.iter().map(|&i| design.y[i]).sum::<f64>() / n;
        let var = train_rows.iter().map(|&i| (design.y[i] - mean).powi(2)).sum::<f64>() / n;
        TargetScaling { mean, std: if var > 0.0 { var.sqrt() } else { 1.0 } }
    } else {
        TargetScaling::IDENTITY
    };
    let y: Vec<f64> = design.y.iter().map(|v| (v - target.mean) / target.std).collect();
    let loss_scale = target.std * target.std;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(design.n_features(), config.n1, config.n2, config.activation, &mut rng);
    let mut opt = RmsProp::new(net.parameter_count(), config.learning_rate, config.rmsprop_decay, config.rmsprop_epsilon);
    let mut stopper = EarlyStopping::new(config.patience, config.stopping);
    let mut best_params = net.params.clone();
    let mut grad = vec![0.0; net.parameter_count()];
    let mut order = train_rows.clone();
    let batch = if config.batch_size == 0 { order.len() } else { config.batch_size };
    let mut trace = Vec::new();

    for epoch in 1..=config.max_epochs {
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut sum = 0.0;
        for rows in order.chunks(batch) {
            let m = match masks {
                MaskMode::Dropout if config.dropout > 0.0 => {
                    Some(BatchMasks::sample(&mut rng, rows.len(), config.n1, config.n2, config.dropout))
                }
                MaskMode::Dropout => None,
                MaskMode::Ones => Some(BatchMasks::ones(rows.len(), config.n1, config.n2)),
            };
            let loss = net.batch_gradient(&design.x, &y, rows, m.as_ref(), &mut grad)?;
            opt.step(&mut net.params, &grad)?;
            sum += loss * rows.len() as f64;
        }
        let train_mse = sum / order.len() as f64 * loss_scale;
        let validation_mse = net.mse(&design.x, &y, &val_rows)? * loss_scale;
        if !validation_mse.is_finite() {
            return Err(Error::Numeric(format!("validation loss diverged at epoch {epoch}")));
        }
        trace.push(EpochStats { epoch, train_mse, validation_mse });
        let obs = stopper.observe(epoch, validation_mse);
        if obs.improved {
            best_params.copy_from_slice(&net.params);
        }
        if obs.stop {
            break;
        }
    }
    net.params = best_params;
    let epochs_run = trace.len();
    log::debug!(
        "trained {} epochs, best epoch {} (validation MSE {:.4e})",
        epochs_run,
        stopper.best_epoch(),
        stopper.best()
    );

    Ok(MlpModel {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        feature_spec: design.spec.clone(),
        column_names: design.column_names.clone(),
        scaler: design.scaler.clone(),
        target,
        network: net,
        best_epoch: stopper.best_epoch(),
        epochs_run,
        trace,
    })
}
