use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::loss::min_loss_multi;
use super::{Experiment, ExperimentModel};
use crate::error::{Error, Result};
use crate::smc::ParticleCloud;

/// How the hedging parameter mixes in an uninformative component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeForm {
    /// `P(0) = (1 − h) cos² + h/2`: hedges toward the uniform distribution.
    #[default]
    Uniform,
    /// `P(0) = (1 − h) cos² + h`: hedges toward outcome 0.
    Literal,
}

/// Single-eigenvalue model used by the filter for collapse-free phase estimation.
pub fn cfpe_model_likelihood(outcome: usize, energy: f64, t: f64, theta: f64, h: f64, form: HedgeForm) -> f64 {
    let c = ((energy - theta) * t / 2.0).cos();
    let offset = match form {
        HedgeForm::Uniform => h / 2.0,
        HedgeForm::Literal => h,
    };
    let p0 = (1.0 - h) * c * c + offset;
    if outcome == 0 {
        p0
    } else {
        1.0 - p0
    }
}

/// Probability of outcome 0 when the input state spreads over several
/// eigenstates with the given amplitudes.
pub fn cfpe_true_probability(energies: &[f64], amplitudes: &[f64], t: f64, theta: f64) -> Result<f64> {
    let norm: f64 = amplitudes.iter().map(|a| a * a).sum();
    if (norm - 1.0).abs() > 1e-9 || energies.len() != amplitudes.len() {
        return Err(Error::AmplitudesNotNormalized(norm));
    }
    Ok(energies
        .iter()
        .zip(amplitudes)
        .map(|(e, a)| a * a * ((e - theta) * t / 2.0).cos().powi(2))
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Collapse-free phase estimation: the filter tracks one eigenvalue `E`
/// while the simulated system mixes several. The truth vector lists the
/// eigenvalues; `populations` holds `|a_j|²` for each.
#[derive(Clone, Debug, PartialEq)]
pub struct CfpeModel {
    pub hedge: f64,
    pub hedge_form: HedgeForm,
    populations: Vec<f64>,
}

impl Default for CfpeModel {
    fn default() -> Self {
        Self {
            hedge: 0.5,
            hedge_form: HedgeForm::Uniform,
            populations: vec![0.5, 0.5],
        }
    }
}

impl CfpeModel {
    pub fn new(hedge: f64, hedge_form: HedgeForm, populations: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&hedge) {
            return Err(Error::Config(format!("hedge {hedge} is outside [0, 1]")));
        }
        let total: f64 = populations.iter().sum();
        if populations.is_empty() || populations.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::AmplitudesNotNormalized(total));
        }
        Ok(Self {
            hedge,
            hedge_form,
            populations,
        })
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    fn true_p0(&self, energies: &[f64], e: &Experiment) -> f64 {
        energies
            .iter()
            .zip(&self.populations)
            .map(|(en, p)| p * ((en - e.theta) * e.t / 2.0).cos().powi(2))
            .sum()
    }
}

impl ExperimentModel for CfpeModel {
    fn name(&self) -> &'static str {
        "cfpe"
    }

    fn parameter_dim(&self) -> usize {
        1
    }

    fn n_outcomes(&self) -> usize {
        2
    }

    fn likelihood(&self, outcome: usize, particle: &[f64], e: &Experiment) -> f64 {
        cfpe_model_likelihood(outcome, particle[0], e.t, e.theta, self.hedge, self.hedge_form)
    }

    fn simulate(&self, truth: &[f64], e: &Experiment, rng: &mut dyn RngCore) -> usize {
        usize::from(rng.random::<f64>() >= self.true_p0(truth, e))
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![rng.random::<f64>()]
    }

    fn sample_truth(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.populations.len()).map(|_| rng.random::<f64>()).collect()
    }

    fn loss(&self, cloud: &ParticleCloud, truth: &[f64]) -> f64 {
        min_loss_multi(cloud, truth)
    }

    fn truth_images(&self, truth: &[f64]) -> Vec<Vec<f64>> {
        truth.iter().map(|e| vec![*e]).collect()
    }
}
