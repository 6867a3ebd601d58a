//! Structured filtering: sequential Monte Carlo inference whose belief
//! state is a tree of particle filters, mixtures and model-selection nodes.
//!
//! The crate provides the particle-filter primitives ([`smc`]), weighted
//! k-means ([`clustering`]), the structure tree ([`tree`]), experiment
//! models for Rabi, randomized gap estimation and collapse-free phase
//! estimation ([`models`]), adaptive design ([`design`]) and a batch
//! harness for seeded trials and ensembles ([`harness`]).

// Negated comparisons are how NaN inputs get rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod clustering;
pub mod design;
mod error;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod smc;
pub mod tree;

pub use design::{design_experiment, pgh, select_design_node, PghConfig};
pub use error::{Error, Result};
pub use models::{CfpeModel, Experiment, ExperimentModel, HedgeForm, RabiModel, RgeModel};
pub use smc::{LiuWest, ParticleCloud, Resampler};
pub use tree::{BranchKind, Context, GlobalConfig, Node, NodeKind, RegionEstimate, StructureTree};
