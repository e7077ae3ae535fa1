use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop after `patience` consecutive epochs without beating the best loss so far.
    #[default]
    BestSoFar,
    /// Stop after `patience` consecutive epochs each worse than the one before.
    EpochOverEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

/// Patience monitor over a validation-loss sequence. Epochs are 1-based.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    rule: StoppingRule,
    best: f64,
    best_epoch: usize,
    previous: f64,
    strikes: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, rule: StoppingRule) -> Self {
        Self { patience, rule, best: f64::INFINITY, best_epoch: 0, previous: f64::INFINITY, strikes: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
        }
        let strike = match self.rule {
            StoppingRule::BestSoFar => !improved,
            StoppingRule::EpochOverEpoch => loss > self.previous,
        };
        self.strikes = if strike { self.strikes + 1 } else { 0 };
        self.previous = loss;
        Observation { improved, stop: self.patience > 0 && self.strikes >= self.patience }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}
