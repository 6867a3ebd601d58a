use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::TrialConfig;
use super::ensemble::{run_ensemble, EnsembleResult};
use crate::error::{Error, Result};

/// Parameters a sweep can vary. All three live on the root context or the
/// design configuration, so they apply to every node that does not
/// override them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Champion odds threshold.
    KChamp,
    PghConstant,
    /// Decision floor weight; also the mixture floor when the base
    /// configuration has a positive one.
    WFloor,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::KChamp => "k_champ",
            SweepParameter::PghConstant => "pgh_constant",
            SweepParameter::WFloor => "w_floor",
        }
    }

    pub fn apply(self, cfg: &mut TrialConfig, value: f64) {
        match self {
            SweepParameter::KChamp => cfg.root_context.champion_threshold = Some(value),
            SweepParameter::PghConstant => cfg.pgh.constant = value,
            SweepParameter::WFloor => {
                if cfg.root_context.mixture_floor.is_some_and(|f| f > 0.0) {
                    cfg.root_context.mixture_floor = Some(value);
                }
                cfg.root_context.decision_floor = Some(value);
            }
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k_champ" => Ok(SweepParameter::KChamp),
            "pgh_constant" => Ok(SweepParameter::PghConstant),
            "w_floor" => Ok(SweepParameter::WFloor),
            other => Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; expected k_champ, pgh_constant or w_floor"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub result: EnsembleResult,
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub value: f64,
    pub final_mean_loss: f64,
    pub final_median_loss: f64,
    pub failed_trials: usize,
}

/// One ensemble per value, each with the same seeds.
pub fn run_sweep(
    base: &TrialConfig,
    parameter: SweepParameter,
    values: &[f64],
    n_trials: usize,
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("a sweep needs at least one value".into()));
    }
    let configs: Vec<TrialConfig> = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            parameter.apply(&mut cfg, v);
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<_>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(cfg, &value)| {
            Ok(SweepPoint {
                value,
                result: run_ensemble(cfg, n_trials, jobs)?,
            })
        })
        .collect()
}

pub fn summarize(parameter: SweepParameter, points: &[SweepPoint]) -> Vec<SummaryRow> {
    points
        .iter()
        .map(|p| {
            let last = p.result.final_aggregate();
            SummaryRow {
                parameter: parameter.name().to_string(),
                value: p.value,
                final_mean_loss: last.map_or(f64::NAN, |a| a.mean_loss),
                final_median_loss: last.map_or(f64::NAN, |a| a.median_loss),
                failed_trials: p.result.n_failed(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in [
            SweepParameter::KChamp,
            SweepParameter::PghConstant,
            SweepParameter::WFloor,
        ] {
            assert_eq!(p.name().parse::<SweepParameter>().unwrap(), p);
        }
        assert!("alpha".parse::<SweepParameter>().is_err());
    }

    #[test]
    fn single_value_matches_ensemble() {
        let mut cfg = TrialConfig::rge_desk();
        cfg.tree.n_part = 120;
        cfg.tree.n_min_part = 30;
        cfg.n_experiments = 8;
        let sweep = run_sweep(&cfg, SweepParameter::KChamp, &[2000.0], 3, 2).unwrap();
        let direct = run_ensemble(&cfg, 3, 2).unwrap();
        assert_eq!(sweep[0].result.aggregate, direct.aggregate);
        let summary = summarize(SweepParameter::KChamp, &sweep);
        assert_eq!(
            summary[0].final_median_loss,
            direct.final_aggregate().unwrap().median_loss
        );
    }

    #[test]
    fn invalid_values_rejected_up_front() {
        let cfg = TrialConfig::rge_desk();
        assert!(run_sweep(&cfg, SweepParameter::WFloor, &[0.1, 1.5], 1, 1).is_err());
        assert!(run_sweep(&cfg, SweepParameter::KChamp, &[], 1, 1).is_err());
    }
}
