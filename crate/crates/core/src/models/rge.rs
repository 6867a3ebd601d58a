use rand::{Rng, RngCore};

use super::loss::{canonical_loss, rge_degenerate_images};
use super::{Experiment, ExperimentModel};
use crate::error::{Error, Result};
use crate::smc::ParticleCloud;

/// Survival probability of a random state, averaged over the unitary group:
/// the mean of `cos²(Δ t / 2)` over every unordered pair of eigenvalues in
/// `{0} ∪ λ`.
pub fn rge_single_shot_probability(lambdas: &[f64], t: f64) -> f64 {
    let n = lambdas.len() + 1;
    let level = |i: usize| if i == 0 { 0.0 } else { lambdas[i - 1] };
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = ((level(i) - level(j)) * t / 2.0).cos();
            total += c * c;
        }
    }
    total / (n * (n - 1) / 2) as f64
}

pub fn binomial_pmf(k: usize, n: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut coeff = 1.0;
    for i in 0..k.min(n - k) {
        coeff = coeff * (n - i) as f64 / (i + 1) as f64;
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Probability of seeing `zero_count` zeros in a batch of `n_meas` shots.
pub fn rge_batch_likelihood(zero_count: usize, lambdas: &[f64], t: f64, n_meas: usize) -> f64 {
    binomial_pmf(zero_count, n_meas, rge_single_shot_probability(lambdas, t))
}

/// Randomized gap estimation with `n_levels` eigenvalues, the lowest fixed
/// at zero. Particle = `(λ₁, …, λ_k)`; outcome = number of zeros in a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgeModel {
    n_levels: usize,
    n_meas: usize,
}

impl Default for RgeModel {
    fn default() -> Self {
        Self { n_levels: 3, n_meas: 3 }
    }
}

impl RgeModel {
    pub fn new(n_levels: usize, n_meas: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::Config("RGE needs at least 2 levels".into()));
        }
        if n_meas < 1 {
            return Err(Error::Config("RGE needs at least 1 measurement per batch".into()));
        }
        Ok(Self { n_levels, n_meas })
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_meas(&self) -> usize {
        self.n_meas
    }
}

impl ExperimentModel for RgeModel {
    fn name(&self) -> &'static str {
        "rge"
    }

    fn parameter_dim(&self) -> usize {
        self.n_levels - 1
    }

    fn n_outcomes(&self) -> usize {
        self.n_meas + 1
    }

    fn likelihood(&self, outcome: usize, particle: &[f64], experiment: &Experiment) -> f64 {
        rge_batch_likelihood(outcome, particle, experiment.t, self.n_meas)
    }

    fn simulate(&self, truth: &[f64], experiment: &Experiment, rng: &mut dyn RngCore) -> usize {
        let p = rge_single_shot_probability(truth, experiment.t);
        (0..self.n_meas).filter(|_| rng.random::<f64>() < p).count()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.parameter_dim()).map(|_| rng.random::<f64>()).collect()
    }

    fn loss(&self, cloud: &ParticleCloud, truth: &[f64]) -> f64 {
        if self.parameter_dim() == 2 {
            return canonical_loss(cloud, [truth[0], truth[1]]);
        }
        // Without a canonical form, compare sorted eigenvalue lists.
        let mut target = truth.to_vec();
        target.sort_by(f64::total_cmp);
        cloud
            .particles()
            .zip(cloud.weights())
            .map(|(x, w)| {
                let mut x = x.to_vec();
                x.sort_by(f64::total_cmp);
                w * x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum()
    }

    fn truth_images(&self, truth: &[f64]) -> Vec<Vec<f64>> {
        if self.parameter_dim() == 2 {
            rge_degenerate_images([truth[0], truth[1]])
                .iter()
                .map(|p| p.to_vec())
                .collect()
        } else {
            vec![truth.to_vec()]
        }
    }
}
