use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-node pruning and reporting parameters. Unset fields are inherited
/// from the nearest ancestor that sets them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub champion_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_champions: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextField {
    Prune,
    MixtureFloor,
    DecisionFloor,
    ChampionThreshold,
    RegionChampions,
}

impl ContextField {
    pub fn name(self) -> &'static str {
        match self {
            ContextField::Prune => "prune",
            ContextField::MixtureFloor => "mixture_floor",
            ContextField::DecisionFloor => "decision_floor",
            ContextField::ChampionThreshold => "champion_threshold",
            ContextField::RegionChampions => "region_champions",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContextValue {
    Bool(bool),
    Real(f64),
    Count(usize),
}

impl Context {
    /// A fully populated root context: pruning on, mixture floor off,
    /// decision floor 0.1, champion odds 2000, one region champion.
    pub fn root_defaults() -> Self {
        Self {
            prune: Some(true),
            mixture_floor: Some(0.0),
            decision_floor: Some(0.1),
            champion_threshold: Some(2000.0),
            region_champions: Some(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// `self` as seen from below: fields set on `child` win.
    pub fn overlay(&self, child: &Context) -> Context {
        Context {
            prune: child.prune.or(self.prune),
            mixture_floor: child.mixture_floor.or(self.mixture_floor),
            decision_floor: child.decision_floor.or(self.decision_floor),
            champion_threshold: child.champion_threshold.or(self.champion_threshold),
            region_champions: child.region_champions.or(self.region_champions),
        }
    }

    pub fn get(&self, field: ContextField) -> Option<ContextValue> {
        match field {
            ContextField::Prune => self.prune.map(ContextValue::Bool),
            ContextField::MixtureFloor => self.mixture_floor.map(ContextValue::Real),
            ContextField::DecisionFloor => self.decision_floor.map(ContextValue::Real),
            ContextField::ChampionThreshold => self.champion_threshold.map(ContextValue::Real),
            ContextField::RegionChampions => self.region_champions.map(ContextValue::Count),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, floor) in [
            ("mixture_floor", self.mixture_floor),
            ("decision_floor", self.decision_floor),
        ] {
            if let Some(f) = floor {
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::Config(format!("{name} = {f} is outside [0, 1)")));
                }
            }
        }
        if let Some(k) = self.champion_threshold {
            if !(k > 1.0) {
                return Err(Error::Config(format!("champion threshold {k} must exceed 1")));
            }
        }
        if self.region_champions == Some(0) {
            return Err(Error::Config("region_champions must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn require_prune(&self) -> Result<bool> {
        self.prune.ok_or(Error::UnsetContextField("prune"))
    }

    pub(crate) fn require_mixture_floor(&self) -> Result<f64> {
        self.mixture_floor.ok_or(Error::UnsetContextField("mixture_floor"))
    }

    pub(crate) fn require_decision_floor(&self) -> Result<f64> {
        self.decision_floor.ok_or(Error::UnsetContextField("decision_floor"))
    }

    pub(crate) fn require_champion_threshold(&self) -> Result<f64> {
        self.champion_threshold
            .ok_or(Error::UnsetContextField("champion_threshold"))
    }

    pub(crate) fn require_region_champions(&self) -> Result<usize> {
        self.region_champions
            .ok_or(Error::UnsetContextField("region_champions"))
    }
}
