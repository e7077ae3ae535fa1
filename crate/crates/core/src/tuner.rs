//! Hyperband search over network hyperparameters.
//!
//! Every trial trains from scratch at its rung's epoch budget; survivors of a
//! rung are the top `floor(n / eta)` by validation MSE, ties going to the
//! earlier sample. Trials inside a rung run on the rayon pool.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::mlp::{self, Activation, MlpConfig, MlpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub activations: Vec<Activation>,
    pub learning_rate_min: f64,
    pub learning_rate_max: f64,
    pub dropouts: Vec<f64>,
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            activations: vec![Activation::Relu, Activation::Tanh, Activation::Sigmoid],
            learning_rate_min: 1e-4,
            learning_rate_max: 1e-2,
            dropouts: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            n1: vec![16, 32, 48],
            n2: vec![16, 32, 48],
        }
    }
}

impl SearchSpace {
    /// A space containing only `c`'s searchable fields.
    pub fn single(c: &MlpConfig) -> Self {
        Self {
            activations: vec![c.activation],
            learning_rate_min: c.learning_rate,
            learning_rate_max: c.learning_rate,
            dropouts: vec![c.dropout],
            n1: vec![c.n1],
            n2: vec![c.n2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.activations.is_empty() || self.dropouts.is_empty() || self.n1.is_empty() || self.n2.is_empty() {
            return Err(Error::Spec("search space has an empty choice set".into()));
        }
        if !(self.learning_rate_min > 0.0 && self.learning_rate_min <= self.learning_rate_max && self.learning_rate_max.is_finite()) {
            return Err(Error::Spec(format!(
                "invalid learning-rate bounds [{}, {}]",
                self.learning_rate_min, self.learning_rate_max
            )));
        }
        Ok(())
    }
}

/// Draws the searchable fields of `base` from `space`; everything else is kept.
pub fn sample_config<R: Rng>(space: &SearchSpace, base: &MlpConfig, rng: &mut R) -> MlpConfig {
    let pick = |rng: &mut R, n: usize| rng.gen_range(0..n);
    let activation = space.activations[pick(rng, space.activations.len())];
    let (lo, hi) = (space.learning_rate_min.log10(), space.learning_rate_max.log10());
    let learning_rate = if hi > lo { 10f64.powf(rng.gen_range(lo..hi)) } else { space.learning_rate_min };
    let dropout = space.dropouts[pick(rng, space.dropouts.len())];
    let n1 = space.n1[pick(rng, space.n1.len())];
    let n2 = space.n2[pick(rng, space.n2.len())];
    MlpConfig { activation, learning_rate, dropout, n1, n2, ..base.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunerConfig {
    pub space: SearchSpace,
    /// Maximum epochs a single trial may be given (R).
    pub max_epochs_per_trial: usize,
    pub eta: usize,
    /// Epoch cap when retraining the winner.
    pub final_max_epochs: usize,
    pub seed: u64,
    /// Source of the fields the search does not touch (batch size, patience, ...).
    pub base: MlpConfig,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            max_epochs_per_trial: 81,
            eta: 3,
            final_max_epochs: 1_500,
            seed: 0,
            base: MlpConfig::reference(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub bracket: usize,
    pub rung: usize,
    /// Index of the sampled configuration within its bracket.
    pub sample: usize,
    pub config: MlpConfig,
    pub budget: usize,
    pub epochs_run: usize,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungRecord {
    pub trials: usize,
    pub budget: usize,
    pub survivors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketRecord {
    pub s: usize,
    pub rungs: Vec<RungRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerResult {
    pub max_epochs_per_trial: usize,
    pub eta: usize,
    pub seed: u64,
    pub best_config: MlpConfig,
    pub best_validation_mse: f64,
    pub leaderboard: Vec<TrialRecord>,
    pub brackets: Vec<BracketRecord>,
}

impl TunerResult {
    /// Sum of trials x budget over all rungs.
    pub fn epochs_allotted(&self) -> usize {
        self.brackets.iter().flat_map(|b| &b.rungs).map(|r| r.trials * r.budget).sum()
    }

    pub fn write_leaderboard_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "bracket", "rung", "sample", "activation", "n1", "n2", "dropout", "learning_rate", "seed", "budget",
            "epochs_run", "validation_mse",
        ])?;
        for t in &self.leaderboard {
            let c = &t.config;
            wtr.write_record([
                t.bracket.to_string(),
                t.rung.to_string(),
                t.sample.to_string(),
                c.activation.to_string(),
                c.n1.to_string(),
                c.n2.to_string(),
                c.dropout.to_string(),
                c.learning_rate.to_string(),
                c.seed.to_string(),
                t.budget.to_string(),
                t.epochs_run.to_string(),
                t.validation_mse.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("writing leaderboard", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One bracket of the schedule: `(trials, budget)` per rung.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketPlan {
    pub s: usize,
    pub rungs: Vec<(usize, usize)>,
}

fn check_budget(r: usize, eta: usize) -> Result<()> {
    if eta < 2 || r < eta {
        return Err(Error::Spec(format!("hyperband needs R >= eta >= 2, got R={r}, eta={eta}")));
    }
    Ok(())
}

/// floor(log_eta r) in integer arithmetic.
fn ilog(r: usize, eta: usize) -> usize {
    let (mut s, mut p) = (0, eta);
    while p <= r {
        s += 1;
        p *= eta;
    }
    s
}

/// The hyperband schedule for `(r, eta)`, largest `s` first.
pub fn bracket_plan(r: usize, eta: usize) -> Result<Vec<BracketPlan>> {
    check_budget(r, eta)?;
    let s_max = ilog(r, eta);
    Ok((0..=s_max)
        .rev()
        .map(|s| {
            let n = ((s_max + 1) * eta.pow(s as u32)).div_ceil(s + 1);
            let rungs = (0..=s)
                .map(|i| {
                    let trials = n / eta.pow(i as u32);
                    let budget = (r * eta.pow(i as u32) / eta.pow(s as u32)).max(1);
                    (trials, budget)
                })
                .take_while(|&(trials, _)| trials > 0)
                .collect();
            BracketPlan { s, rungs }
        })
        .collect())
}

fn evaluate_trial(design: &DesignMatrix, config: &MlpConfig) -> Result<(f64, usize)> {
    match mlp::train(design, config) {
        Ok(m) => Ok((m.best_validation_mse(), m.epochs_run)),
        // A diverging trial loses; it does not abort the search.
        Err(Error::Numeric(msg)) => {
            log::warn!("trial diverged: {msg}");
            Ok((f64::INFINITY, 0))
        }
        Err(e) => Err(e),
    }
}

/// Runs the search only; see [`tune`] for search plus retraining.
pub fn run_hyperband(design: &DesignMatrix, cfg: &TunerConfig) -> Result<TunerResult> {
    cfg.space.validate()?;
    cfg.base.validate()?;
    let plan = bracket_plan(cfg.max_epochs_per_trial, cfg.eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut leaderboard = Vec::new();
    let mut brackets = Vec::new();

    for bp in &plan {
        let n = bp.rungs[0].0;
        let candidates: Vec<MlpConfig> = (0..n)
            .map(|_| {
                let mut c = sample_config(&cfg.space, &cfg.base, &mut rng);
                c.seed = rng.gen();
                c
            })
            .collect();
        let mut alive: Vec<usize> = (0..n).collect();
        let mut rungs = Vec::new();
        for (rung, &(_, budget)) in bp.rungs.iter().enumerate() {
            let results: Vec<Result<(f64, usize)>> = alive
                .par_iter()
                .map(|&i| evaluate_trial(design, &MlpConfig { max_epochs: budget, ..candidates[i].clone() }))
                .collect();
            let mut scored = Vec::with_capacity(alive.len());
            for (&i, res) in alive.iter().zip(results) {
                let (mse, epochs_run) = res?;
                leaderboard.push(TrialRecord {
                    bracket: bp.s,
                    rung,
                    sample: i,
                    config: MlpConfig { max_epochs: budget, ..candidates[i].clone() },
                    budget,
                    epochs_run,
                    validation_mse: mse,
                });
                scored.push((mse, i));
            }
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let keep = bp.rungs.get(rung + 1).map_or(0, |r| r.0);
            let trials = alive.len();
            alive = scored.iter().take(keep).map(|&(_, i)| i).collect();
            rungs.push(RungRecord { trials, budget, survivors: alive.clone() });
        }
        brackets.push(BracketRecord { s: bp.s, rungs });
    }

    let best = leaderboard
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.validation_mse.total_cmp(&b.1.validation_mse).then(a.0.cmp(&b.0)))
        .map(|(_, t)| t.clone())
        .ok_or_else(|| Error::Spec("hyperband schedule is empty".into()))?;
    if !best.validation_mse.is_finite() {
        return Err(Error::Numeric("every hyperband trial diverged".into()));
    }
    Ok(TunerResult {
        max_epochs_per_trial: cfg.max_epochs_per_trial,
        eta: cfg.eta,
        seed: cfg.seed,
        best_config: MlpConfig { max_epochs: cfg.final_max_epochs, ..best.config },
        best_validation_mse: best.validation_mse,
        leaderboard,
        brackets,
    })
}

/// Search, then retrain the winning configuration with the full epoch cap.
pub fn tune(design: &DesignMatrix, cfg: &TunerConfig) -> Result<(TunerResult, MlpModel)> {
    let result = run_hyperband(design, cfg)?;
    let model = mlp::train(design, &result.best_config)?;
    Ok((result, model))
}
