//! Seeded trials, Monte Carlo ensembles and parameter sweeps over the
//! benchmark models, with CSV and JSON outputs.

pub mod analysis;
mod config;
mod ensemble;
pub mod output;
mod sweep;
mod trial;

pub use config::{DesignRule, LossScope, ModelConfig, TrialConfig, TruthSource};
pub use ensemble::{aggregate, loss_rows, run_ensemble, AggregateRow, EnsembleResult, LossRow};
pub use sweep::{run_sweep, summarize, SummaryRow, SweepParameter, SweepPoint};
pub use trial::{run_trial, trial_rng, StepRow, TrialError, TrialRecord};
