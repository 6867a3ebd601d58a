//! Credible regions as unions of covariance ellipsoids.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{BranchKind, Context, Node, NodeBody, StructureTree};
use crate::error::{Error, Result};
use crate::numeric::regularized_with_inverse;

/// `{x : (x - center)ᵀ shape⁻¹ (x - center) ≤ radius²}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    /// Row-major, symmetric positive-definite.
    pub shape: Vec<Vec<f64>>,
    pub radius: f64,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Squared Mahalanobis distance of `x` from the center.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { len: x.len(), dim: d });
        }
        let shape = DMatrix::from_fn(d, d, |r, c| self.shape[r][c]);
        let chol = shape.cholesky().ok_or(Error::DegenerateCovariance)?;
        let diff = DVector::from_iterator(d, x.iter().zip(&self.center).map(|(a, b)| a - b));
        let y = chol.solve(&diff);
        Ok(diff.dot(&y))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.mahalanobis_sq(x)
            .map(|m| m <= self.radius * self.radius)
            .unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub alpha: f64,
    pub ellipsoids: Vec<Ellipsoid>,
}

impl RegionEstimate {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.ellipsoids.iter().any(|e| e.contains(x))
    }
}

impl StructureTree {
    /// Union of leaf ellipsoids: every child of a mixture, the heaviest
    /// `region_champions` children of a decision node.
    pub fn region_estimate(&self, alpha: f64) -> Result<RegionEstimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("credibility {alpha} is outside (0, 1)")));
        }
        let mut ellipsoids = Vec::new();
        collect(self.root(), &self.root().context, alpha, &mut ellipsoids)?;
        Ok(RegionEstimate { alpha, ellipsoids })
    }
}

fn collect(node: &Node, ctx: &Context, alpha: f64, out: &mut Vec<Ellipsoid>) -> Result<()> {
    match &node.body {
        NodeBody::Filter(cloud) => {
            let m = cloud.moments();
            let (shape, _) = regularized_with_inverse(&m.covariance)?;
            let dim = cloud.dim();
            let chi = ChiSquared::new(dim as f64).map_err(|e| Error::Config(e.to_string()))?;
            out.push(Ellipsoid {
                center: m.mean.iter().copied().collect(),
                shape: (0..dim).map(|r| (0..dim).map(|c| shape[(r, c)]).collect()).collect(),
                radius: chi.inverse_cdf(alpha).sqrt(),
            });
        }
        NodeBody::Branch { kind, children } => {
            let mut order: Vec<usize> = (0..children.len()).collect();
            let take = match kind {
                BranchKind::Mixture => children.len(),
                BranchKind::Decision => {
                    // stable: equal weights keep child order
                    order.sort_by(|&a, &b| children[b].weight.total_cmp(&children[a].weight));
                    ctx.require_region_champions()?.min(children.len())
                }
            };
            for &i in &order[..take] {
                let child = &children[i].node;
                collect(child, &ctx.overlay(&child.context), alpha, out)?;
            }
        }
    }
    Ok(())
}
