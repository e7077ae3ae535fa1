//! Counterfactual re-dispatch cost prediction.
//!
//! Builds hourly zonal net-demand panels from market data, trains a
//! business-as-usual cost predictor (a two-hidden-layer network and
//! least-squares baselines), evaluates out-of-sample errors and runs
//! renewable-expansion counterfactuals.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod linreg;
pub mod market_data;
pub mod mlp;
pub mod net_demand;
pub mod pipeline;
pub mod predictor;
pub mod scenarios;
pub mod splits;
pub mod synth;
pub mod tuner;

pub use error::{Error, Result};
