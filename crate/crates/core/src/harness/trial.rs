use log::warn;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DesignRule, LossScope, TrialConfig, TruthSource};
use crate::design::design_experiment;
use crate::error::Error;
use crate::models::{Experiment, ExperimentModel};
use crate::smc::ParticleCloud;
use crate::tree::{RegionEstimate, StructureTree, TreeSnapshot};

/// One experiment of a trial, after update, pruning and resampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    /// 1-based.
    pub experiment_index: usize,
    pub t: f64,
    pub theta: f64,
    pub outcome: usize,
    pub loss: f64,
    /// Effective sample size of the flattened posterior.
    pub ess: f64,
    pub n_leaves: usize,
    pub depth: usize,
    /// The datum had zero evidence under every leaf and was discarded.
    pub rejected: bool,
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub truth: Vec<f64>,
    pub prior_loss: f64,
    pub rows: Vec<StepRow>,
    pub region: RegionEstimate,
    pub snapshots: Vec<TreeSnapshot>,
    pub tree: StructureTree,
}

impl TrialRecord {
    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(self.prior_loss, |r| r.loss)
    }

    pub fn posterior(&self) -> ParticleCloud {
        self.tree.flatten()
    }
}

/// A trial that stopped early. Carries what is needed to replay it and the
/// rows completed before the failure.
#[derive(Debug)]
pub struct TrialError {
    pub trial: usize,
    pub seed: u64,
    pub source: Error,
    pub prior_loss: Option<f64>,
    pub rows: Vec<StepRow>,
}

impl std::fmt::Display for TrialError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trial {} (seed {}) failed after {} experiments: {}",
            self.trial,
            self.seed,
            self.rows.len(),
            self.source
        )
    }
}

impl std::error::Error for TrialError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// The generator for trial `trial` of a run seeded with `seed`: one ChaCha
/// stream per trial, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn run_trial(cfg: &TrialConfig, trial: usize) -> Result<TrialRecord, TrialError> {
    let mut rows = Vec::with_capacity(cfg.n_experiments);
    let mut prior_loss = None;
    let fail = |source: Error, prior_loss: Option<f64>, rows: Vec<StepRow>| TrialError {
        trial,
        seed: cfg.seed,
        source,
        prior_loss,
        rows,
    };
    match run_inner(cfg, trial, &mut rows, &mut prior_loss) {
        Ok(rec) => Ok(rec),
        Err(e) => Err(fail(e, prior_loss, rows)),
    }
}

fn run_inner(
    cfg: &TrialConfig,
    trial: usize,
    rows: &mut Vec<StepRow>,
    prior_loss: &mut Option<f64>,
) -> crate::Result<TrialRecord> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let mut rng = trial_rng(cfg.seed, trial);
    let truth = match &cfg.truth {
        TruthSource::Prior => model.sample_truth(&mut rng),
        TruthSource::Explicit { values } => values.clone(),
    };
    let tree_cfg = cfg.effective_tree();
    let resampler = tree_cfg.liu_west;
    let mut tree = StructureTree::new(
        |r: &mut dyn RngCore| model.sample_prior(r),
        tree_cfg,
        cfg.root_context.clone(),
        &mut rng,
    )?;
    let loss_of = |tree: &StructureTree, model: &dyn ExperimentModel| -> (f64, f64) {
        let cloud = match cfg.loss_scope {
            LossScope::ModelAveraged => tree.flatten(),
            LossScope::Champion => tree.flatten_champion(),
        };
        (model.loss(&cloud, &truth), cloud.ess())
    };
    *prior_loss = Some(loss_of(&tree, model.as_ref()).0);

    let mut snapshots = Vec::new();
    for k in 1..=cfg.n_experiments {
        let experiment = match cfg.design {
            DesignRule::Pgh => design_experiment(&tree, &cfg.pgh, &mut rng)?,
            DesignRule::Geometric { ratio } => Experiment::at_time(ratio.powi(k as i32)),
        };
        let outcome = model.simulate(&truth, &experiment, &mut rng);
        let rejected = match tree.update(model.as_ref(), outcome, &experiment) {
            Ok(_) => false,
            Err(Error::EmptyTree) => {
                warn!("trial {trial}: experiment {k} has zero evidence, datum rejected");
                true
            }
            Err(e) => return Err(e),
        };
        if !rejected {
            tree.prune()?;
            tree.structured_resample(&resampler, &mut rng)?;
        }
        debug_assert!(tree.audit().is_ok(), "{:?}", tree.audit());
        let (loss, ess) = loss_of(&tree, model.as_ref());
        rows.push(StepRow {
            experiment_index: k,
            t: experiment.t,
            theta: experiment.theta,
            outcome,
            loss,
            ess,
            n_leaves: tree.n_leaves(),
            depth: tree.depth(),
            rejected,
        });
        if cfg.snapshot_every.is_some_and(|every| k % every == 0) {
            snapshots.push(tree.snapshot(Some(k), false));
        }
    }

    Ok(TrialRecord {
        trial,
        seed: cfg.seed,
        truth,
        prior_loss: prior_loss.expect("set above"),
        rows: std::mem::take(rows),
        region: tree.region_estimate(cfg.region_alpha)?,
        snapshots,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut cfg: TrialConfig) -> TrialConfig {
        cfg.tree.n_part = 200;
        cfg.tree.n_min_part = 50;
        cfg.n_experiments = 30;
        cfg
    }

    #[test]
    fn zero_experiments_gives_prior_summary() {
        let cfg = TrialConfig {
            n_experiments: 0,
            ..small(TrialConfig::rge_desk())
        };
        let rec = run_trial(&cfg, 0).unwrap();
        assert!(rec.rows.is_empty());
        assert_eq!(rec.final_loss(), rec.prior_loss);
        assert!(rec.prior_loss > 0.0);
    }

    #[test]
    fn deterministic_per_seed_and_trial() {
        let cfg = small(TrialConfig::cfpe_desk());
        let a = run_trial(&cfg, 3).unwrap();
        let b = run_trial(&cfg, 3).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.tree, b.tree);
        let c = run_trial(&cfg, 4).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn rows_track_every_experiment() {
        let cfg = TrialConfig {
            snapshot_every: Some(10),
            ..small(TrialConfig::rge_desk())
        };
        let rec = run_trial(&cfg, 0).unwrap();
        assert_eq!(rec.rows.len(), 30);
        assert_eq!(rec.snapshots.len(), 3);
        for (i, r) in rec.rows.iter().enumerate() {
            assert_eq!(r.experiment_index, i + 1);
            assert!(r.loss.is_finite() && r.loss >= 0.0);
            assert!(r.t > 0.0 && r.t <= cfg.pgh.t_max);
            assert!(r.depth <= cfg.tree.d_max);
        }
        rec.tree.audit().unwrap();
    }

    #[test]
    fn baseline_stays_a_single_filter() {
        let cfg = TrialConfig {
            baseline: true,
            ..small(TrialConfig::rge_desk())
        };
        let rec = run_trial(&cfg, 0).unwrap();
        assert!(rec.rows.iter().all(|r| r.n_leaves == 1 && r.depth == 1));
    }

    #[test]
    fn geometric_schedule() {
        let cfg = TrialConfig::rabi_desk();
        let cfg = TrialConfig {
            n_experiments: 3,
            ..small(cfg)
        };
        let rec = run_trial(&cfg, 0).unwrap();
        let ts: Vec<f64> = rec.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![1.125, 1.125f64.powi(2), 1.125f64.powi(3)]);
    }

    #[test]
    fn config_errors_surface_with_trial_and_seed() {
        let mut cfg = small(TrialConfig::rge_desk());
        cfg.seed = 17;
        cfg.tree.d_max = 0;
        let err = run_trial(&cfg, 5).unwrap_err();
        assert_eq!((err.trial, err.seed), (5, 17));
        assert!(matches!(err.source, Error::Config(_)));
    }
}
