use rand::{Rng, RngCore};

use super::{Experiment, ExperimentModel};
use crate::smc::ParticleCloud;

/// `cos²(ωt/2)` for outcome 0, `sin²(ωt/2)` for outcome 1.
pub fn rabi_likelihood(outcome: usize, omega: f64, t: f64) -> f64 {
    let c = (omega * t / 2.0).cos();
    let p0 = c * c;
    if outcome == 0 {
        p0
    } else {
        1.0 - p0
    }
}

/// Single-qubit Rabi frequency estimation; particle = `(ω)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiModel {
    pub prior_low: f64,
    pub prior_high: f64,
}

impl Default for RabiModel {
    fn default() -> Self {
        Self {
            prior_low: -1.0,
            prior_high: 1.0,
        }
    }
}

impl ExperimentModel for RabiModel {
    fn name(&self) -> &'static str {
        "rabi"
    }

    fn parameter_dim(&self) -> usize {
        1
    }

    fn n_outcomes(&self) -> usize {
        2
    }

    fn likelihood(&self, outcome: usize, particle: &[f64], experiment: &Experiment) -> f64 {
        rabi_likelihood(outcome, particle[0], experiment.t)
    }

    fn simulate(&self, truth: &[f64], experiment: &Experiment, rng: &mut dyn RngCore) -> usize {
        let p0 = rabi_likelihood(0, truth[0], experiment.t);
        usize::from(rng.random::<f64>() >= p0)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![rng.random_range(self.prior_low..self.prior_high)]
    }

    /// The likelihood is even in ω, so the loss compares magnitudes.
    fn loss(&self, cloud: &ParticleCloud, truth: &[f64]) -> f64 {
        let target = truth[0].abs();
        cloud
            .particles()
            .zip(cloud.weights())
            .map(|(x, w)| w * (x[0].abs() - target).powi(2))
            .sum()
    }

    fn truth_images(&self, truth: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![truth[0]], vec![-truth[0]]]
    }
}
