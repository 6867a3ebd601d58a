use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{mean, median};
use super::config::TrialConfig;
use super::trial::{run_trial, TrialError, TrialRecord};
use crate::error::{Error, Result};

/// One row of `losses.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub trial: usize,
    pub experiment_index: usize,
    pub loss: f64,
    pub ess: f64,
    pub n_leaves: usize,
    pub depth: usize,
    pub failed: bool,
}

/// One row of `aggregate.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub experiment_index: usize,
    pub mean_loss: f64,
    pub median_loss: f64,
}

#[derive(Debug)]
pub struct EnsembleResult {
    /// Ordered by trial index.
    pub outcomes: Vec<std::result::Result<TrialRecord, TrialError>>,
    pub loss_rows: Vec<LossRow>,
    pub aggregate: Vec<AggregateRow>,
}

impl EnsembleResult {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialError> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }

    pub fn n_failed(&self) -> usize {
        self.failures().count()
    }

    pub fn final_aggregate(&self) -> Option<&AggregateRow> {
        self.aggregate.last()
    }

    pub fn median_series(&self) -> Vec<f64> {
        self.aggregate.iter().map(|a| a.median_loss).collect()
    }

    pub fn mean_series(&self) -> Vec<f64> {
        self.aggregate.iter().map(|a| a.mean_loss).collect()
    }
}

/// Runs trials `0..n_trials` on a pool of `jobs` workers (0 picks the
/// number of CPUs). Results do not depend on `jobs`.
pub fn run_ensemble(cfg: &TrialConfig, n_trials: usize, jobs: usize) -> Result<EnsembleResult> {
    if n_trials == 0 {
        return Err(Error::Config("an ensemble needs at least one trial".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| (0..n_trials).into_par_iter().map(|i| run_trial(cfg, i)).collect());
    for f in outcomes.iter().filter_map(|o| o.as_ref().err()) {
        warn!("{f}");
    }
    let loss_rows = loss_rows(&outcomes, cfg.n_experiments);
    let aggregate = aggregate(&loss_rows, n_trials, cfg.n_experiments);
    Ok(EnsembleResult {
        outcomes,
        loss_rows,
        aggregate,
    })
}

/// Flattens trial outcomes into rows. A failed trial keeps its completed
/// rows and repeats its last loss up to `n_experiments`; every row of such a
/// trial is flagged.
pub fn loss_rows(outcomes: &[std::result::Result<TrialRecord, TrialError>], n_experiments: usize) -> Vec<LossRow> {
    let mut out = Vec::with_capacity(outcomes.len() * n_experiments);
    for (trial, outcome) in outcomes.iter().enumerate() {
        match outcome {
            Ok(rec) => out.extend(rec.rows.iter().map(|r| LossRow {
                trial,
                experiment_index: r.experiment_index,
                loss: r.loss,
                ess: r.ess,
                n_leaves: r.n_leaves,
                depth: r.depth,
                failed: false,
            })),
            Err(err) => {
                let mut last = LossRow {
                    trial,
                    experiment_index: 0,
                    loss: err.prior_loss.unwrap_or(f64::NAN),
                    ess: 0.0,
                    n_leaves: 0,
                    depth: 0,
                    failed: true,
                };
                for k in 1..=n_experiments {
                    if let Some(r) = err.rows.get(k - 1) {
                        last = LossRow {
                            trial,
                            experiment_index: k,
                            loss: r.loss,
                            ess: r.ess,
                            n_leaves: r.n_leaves,
                            depth: r.depth,
                            failed: true,
                        };
                    }
                    out.push(LossRow {
                        experiment_index: k,
                        ..last.clone()
                    });
                }
            }
        }
    }
    out
}

/// Mean and median loss per experiment index, reduced in trial order.
pub fn aggregate(rows: &[LossRow], n_trials: usize, n_experiments: usize) -> Vec<AggregateRow> {
    let mut by_index = vec![Vec::with_capacity(n_trials); n_experiments];
    for r in rows {
        by_index[r.experiment_index - 1].push(r.loss);
    }
    by_index
        .into_iter()
        .enumerate()
        .map(|(i, losses)| AggregateRow {
            experiment_index: i + 1,
            mean_loss: mean(&losses),
            median_loss: median(&losses),
        })
        .collect()
}
