use serde::{Deserialize, Serialize};

use crate::design::PghConfig;
use crate::error::{Error, Result};
use crate::models::{CfpeModel, ExperimentModel, HedgeForm, RabiModel, RgeModel};
use crate::smc::LiuWest;
use crate::tree::{Context, GlobalConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Rabi,
    Rge {
        #[serde(default = "default_levels")]
        n_levels: usize,
        #[serde(default = "default_meas")]
        n_meas: usize,
    },
    Cfpe {
        #[serde(default = "default_hedge")]
        hedge: f64,
        #[serde(default)]
        hedge_form: HedgeForm,
        #[serde(default = "default_populations")]
        populations: Vec<f64>,
    },
}

fn default_levels() -> usize {
    3
}
fn default_meas() -> usize {
    3
}
fn default_hedge() -> f64 {
    0.5
}
fn default_populations() -> Vec<f64> {
    vec![0.5, 0.5]
}

impl ModelConfig {
    pub fn build(&self) -> Result<Box<dyn ExperimentModel>> {
        Ok(match self {
            ModelConfig::Rabi => Box::new(RabiModel::default()),
            ModelConfig::Rge { n_levels, n_meas } => Box::new(RgeModel::new(*n_levels, *n_meas)?),
            ModelConfig::Cfpe {
                hedge,
                hedge_form,
                populations,
            } => Box::new(CfpeModel::new(*hedge, *hedge_form, populations.clone())?),
        })
    }
}

/// Where the true system of a trial comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TruthSource {
    /// Drawn per trial by the model's truth sampler.
    Prior,
    Explicit {
        values: Vec<f64>,
    },
}

/// How evolution times are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DesignRule {
    /// Particle guess heuristic on the minimum-Bayes-factor leaf.
    Pgh,
    /// Non-adaptive `t_k = ratio^k` for experiments `k = 1, 2, ...`, `θ = 0`.
    Geometric { ratio: f64 },
}

/// Which posterior the loss is computed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScope {
    /// Every leaf, weighted by its root-path edge product.
    #[default]
    ModelAveraged,
    /// Only the heaviest branch of each decision node.
    Champion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub model: ModelConfig,
    pub truth: TruthSource,
    pub tree: GlobalConfig,
    pub root_context: Context,
    pub pgh: PghConfig,
    pub design: DesignRule,
    pub n_experiments: usize,
    pub seed: u64,
    /// A single filter that is never split, resampled with plain Liu-West.
    pub baseline: bool,
    pub loss_scope: LossScope,
    /// Credibility of the final region estimate.
    pub region_alpha: f64,
    /// Keep a tree snapshot every this many experiments.
    pub snapshot_every: Option<usize>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self::rge_desk()
    }
}

impl TrialConfig {
    /// Randomized gap estimation with a three-level system at desk scale.
    pub fn rge_desk() -> Self {
        Self {
            model: ModelConfig::Rge { n_levels: 3, n_meas: 3 },
            truth: TruthSource::Prior,
            tree: GlobalConfig {
                d_max: 4,
                n_cluster_set: vec![1, 2],
                n_part: 2000,
                n_min_part: 250,
                liu_west: LiuWest { a: 0.98 },
                ..GlobalConfig::default()
            },
            root_context: Context {
                decision_floor: Some(0.1),
                champion_threshold: Some(2000.0),
                ..Context::root_defaults()
            },
            pgh: PghConfig::default(),
            design: DesignRule::Pgh,
            n_experiments: 500,
            seed: 0,
            baseline: false,
            loss_scope: LossScope::ModelAveraged,
            region_alpha: 0.95,
            snapshot_every: None,
        }
    }

    /// Collapse-free phase estimation with two eigenvalues at equal
    /// population, hedged toward the uniform outcome distribution. The floor
    /// also applies at mixtures so the filter commits to one eigenvalue.
    pub fn cfpe_desk() -> Self {
        let mut cfg = Self::rge_desk();
        cfg.model = ModelConfig::Cfpe {
            hedge: 0.5,
            hedge_form: HedgeForm::Uniform,
            populations: vec![0.5, 0.5],
        };
        cfg.tree.d_max = 6;
        cfg.root_context.mixture_floor = cfg.root_context.decision_floor;
        cfg
    }

    /// Rabi frequency estimation on `[-1, 1]` with the non-adaptive
    /// `(9/8)^k` schedule.
    pub fn rabi_desk() -> Self {
        let mut cfg = Self::rge_desk();
        cfg.model = ModelConfig::Rabi;
        cfg.truth = TruthSource::Explicit { values: vec![0.5] };
        cfg.design = DesignRule::Geometric { ratio: 9.0 / 8.0 };
        cfg.n_experiments = 40;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.root_context.validate()?;
        for field in [
            "prune",
            "mixture_floor",
            "decision_floor",
            "champion_threshold",
            "region_champions",
        ] {
            let set = match field {
                "prune" => self.root_context.prune.is_some(),
                "mixture_floor" => self.root_context.mixture_floor.is_some(),
                "decision_floor" => self.root_context.decision_floor.is_some(),
                "champion_threshold" => self.root_context.champion_threshold.is_some(),
                _ => self.root_context.region_champions.is_some(),
            };
            if !set {
                return Err(Error::Config(format!("root context must set {field}")));
            }
        }
        self.pgh.validate()?;
        if let DesignRule::Geometric { ratio } = self.design {
            if !(ratio > 0.0 && ratio.is_finite()) {
                return Err(Error::Config(format!("geometric ratio {ratio} must be positive")));
            }
        }
        if !(self.region_alpha > 0.0 && self.region_alpha < 1.0) {
            return Err(Error::Config("region_alpha must lie in (0, 1)".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        let model = self.model.build()?;
        if let TruthSource::Explicit { values } = &self.truth {
            let expected = match &self.model {
                ModelConfig::Cfpe { populations, .. } => populations.len(),
                _ => model.parameter_dim(),
            };
            if values.len() != expected {
                return Err(Error::Config(format!(
                    "explicit truth has {} values, the model needs {expected}",
                    values.len()
                )));
            }
        }
        Ok(())
    }

    /// The configuration actually run: the baseline replaces the tree by a
    /// single filter that can never split.
    pub fn effective_tree(&self) -> GlobalConfig {
        if self.baseline {
            GlobalConfig {
                d_max: 1,
                ..self.tree.clone()
            }
        } else {
            self.tree.clone()
        }
    }
}
