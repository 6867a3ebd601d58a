//! Experiment models: likelihoods, simulators, priors and losses.

mod cfpe;
mod loss;
mod rabi;
mod rge;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::smc::ParticleCloud;

pub use cfpe::{cfpe_model_likelihood, cfpe_true_probability, CfpeModel, HedgeForm};
pub use loss::{canonical_loss, canonicalize, min_loss, rge_degenerate_images};
pub use rabi::{rabi_likelihood, RabiModel};
pub use rge::{binomial_pmf, rge_batch_likelihood, rge_single_shot_probability, RgeModel};

/// Controls of one experiment: evolution time and, for phase estimation,
/// the inversion phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub t: f64,
    #[serde(default)]
    pub theta: f64,
}

impl Experiment {
    pub fn at_time(t: f64) -> Self {
        Self { t, theta: 0.0 }
    }
}

/// A likelihood over a finite outcome space plus everything a benchmark needs
/// to drive it: a prior, a simulator for the true system and a loss.
pub trait ExperimentModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn parameter_dim(&self) -> usize;

    /// Outcomes are `0..n_outcomes()`.
    fn n_outcomes(&self) -> usize;

    fn likelihood(&self, outcome: usize, particle: &[f64], experiment: &Experiment) -> f64;

    /// Draws an outcome from the true system described by `truth`.
    fn simulate(&self, truth: &[f64], experiment: &Experiment, rng: &mut dyn RngCore) -> usize;

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Draws a true system. Defaults to a prior draw.
    fn sample_truth(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample_prior(rng)
    }

    /// Loss of a (flattened) posterior against the truth.
    fn loss(&self, cloud: &ParticleCloud, truth: &[f64]) -> f64;

    /// Points in parameter space that the data cannot distinguish from the
    /// truth. Used for region coverage checks.
    fn truth_images(&self, truth: &[f64]) -> Vec<Vec<f64>>;

    fn likelihoods(&self, outcome: usize, cloud: &ParticleCloud, experiment: &Experiment) -> Vec<f64> {
        cloud
            .particles()
            .map(|x| self.likelihood(outcome, x, experiment))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_normalization(model: &dyn ExperimentModel, rng: &mut ChaCha8Rng, samples: usize) {
        for _ in 0..samples {
            let x = model.sample_prior(rng);
            let e = Experiment {
                t: rng.random_range(0.0..200.0),
                theta: rng.random_range(-1.0..1.0),
            };
            let total: f64 = (0..model.n_outcomes())
                .map(|o| {
                    let l = model.likelihood(o, &x, &e);
                    assert!((0.0..=1.0).contains(&l), "{} gave {l}", model.name());
                    l
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "{}: {total}", model.name());
        }
    }

    #[test]
    fn likelihoods_normalize_over_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        check_normalization(&RabiModel::default(), &mut rng, 10_000);
        check_normalization(&RgeModel::default(), &mut rng, 10_000);
        check_normalization(&RgeModel::new(4, 5).unwrap(), &mut rng, 10_000);
        check_normalization(&CfpeModel::default(), &mut rng, 10_000);
        let literal = CfpeModel::new(0.5, HedgeForm::Literal, vec![0.5, 0.5]).unwrap();
        check_normalization(&literal, &mut rng, 10_000);
    }

    #[test]
    fn simulators_match_likelihoods() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let models: Vec<Box<dyn ExperimentModel>> = vec![Box::new(RabiModel::default()), Box::new(RgeModel::default())];
        for m in &models {
            let truth = m.sample_truth(&mut rng);
            let e = Experiment::at_time(3.7);
            let n = 40_000;
            let mut counts = vec![0usize; m.n_outcomes()];
            for _ in 0..n {
                counts[m.simulate(&truth, &e, &mut rng)] += 1;
            }
            for (o, c) in counts.iter().enumerate() {
                let p = m.likelihood(o, &truth, &e);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((*c as f64 / n as f64 - p).abs() < 5.0 * se + 1e-3);
            }
        }
    }
}
