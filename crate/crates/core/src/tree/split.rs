//! Structured resampling: leaves with low effective sample size are either
//! split into a decision over candidate clusterings or resampled in place.

use log::debug;
use rand::RngCore;

use super::{Edge, GlobalConfig, Node, NodeBody, StructureTree};
use crate::clustering::weighted_kmeans_best;
use crate::error::{Error, Result};
use crate::smc::{ParticleCloud, Resampler};

/// Counts of what one structured resampling pass did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResampleReport {
    pub splits: usize,
    pub local_resamples: usize,
    /// Clustering candidates left out of a split.
    pub skipped_candidates: usize,
}

impl StructureTree {
    /// Visits every leaf whose `ess / n` is below the resample threshold.
    pub fn structured_resample(&mut self, resampler: &dyn Resampler, rng: &mut dyn RngCore) -> Result<ResampleReport> {
        let cfg = self.config().clone();
        let mut report = ResampleReport::default();
        visit(self.root_mut(), 0, &cfg, resampler, rng, &mut report)?;
        Ok(report)
    }

    /// Replaces the leaf at `path` by the subtree a splitting move builds,
    /// skipping the local resampling step when `resample` is false. Depth
    /// and threshold checks are not applied.
    pub fn split_leaf_at(
        &mut self,
        path: &[usize],
        resample: Option<&dyn Resampler>,
        rng: &mut dyn RngCore,
    ) -> Result<ResampleReport> {
        let cfg = self.config().clone();
        let mut node = self.root_mut();
        for &i in path {
            node = match &mut node.body {
                NodeBody::Branch { children, .. } => {
                    &mut children
                        .get_mut(i)
                        .ok_or_else(|| Error::NoSuchNode(path.to_vec()))?
                        .node
                }
                NodeBody::Filter(_) => return Err(Error::NoSuchNode(path.to_vec())),
            };
        }
        let NodeBody::Filter(cloud) = &node.body else {
            return Err(Error::NoSuchNode(path.to_vec()));
        };
        let mut report = ResampleReport::default();
        let replacement = split(cloud, &cfg, resample, rng, &mut report)?;
        let context = std::mem::take(&mut node.context);
        *node = replacement.with_context(context);
        Ok(report)
    }
}

fn visit(
    node: &mut Node,
    depth: usize,
    cfg: &GlobalConfig,
    resampler: &dyn Resampler,
    rng: &mut dyn RngCore,
    report: &mut ResampleReport,
) -> Result<()> {
    let NodeBody::Branch { children, .. } = &mut node.body else {
        return Ok(());
    };
    for edge in children.iter_mut() {
        let child = &mut edge.node;
        match &mut child.body {
            NodeBody::Branch { .. } => visit(child, depth + 1, cfg, resampler, rng, report)?,
            NodeBody::Filter(cloud) => {
                if cloud.ess() / cloud.len() as f64 >= cfg.resample_threshold {
                    continue;
                }
                if cfg.can_split_at(depth + 1) {
                    let replacement = split(cloud, cfg, Some(resampler), rng, report)?;
                    let context = std::mem::take(&mut child.context);
                    *child = replacement.with_context(context);
                } else {
                    *cloud = resampler.resample(cloud, cloud.len(), rng)?;
                    report.local_resamples += 1;
                }
            }
        }
    }
    Ok(())
}

/// The splitting move. With `resample = None` the clusters keep their
/// original particles and relative weights.
fn split(
    cloud: &ParticleCloud,
    cfg: &GlobalConfig,
    resample: Option<&dyn Resampler>,
    rng: &mut dyn RngCore,
    report: &mut ResampleReport,
) -> Result<Node> {
    let redraw = |c: &ParticleCloud, n: usize, rng: &mut dyn RngCore| -> Result<ParticleCloud> {
        match resample {
            Some(r) => r.resample(c, n, rng),
            None => Ok(c.clone()),
        }
    };

    let mut options = Vec::with_capacity(cfg.n_cluster_set.len());
    for &k in &cfg.n_cluster_set {
        if k == 1 {
            options.push(Node::filter(redraw(cloud, cloud.len(), rng)?));
            continue;
        }
        let Some(parts) = partition(cloud, k, cfg, rng)? else {
            report.skipped_candidates += 1;
            continue;
        };
        let mut edges = Vec::with_capacity(k);
        for (weight, sub) in parts {
            let n = cfg.n_min_part.max(sub.len());
            edges.push(Edge::new(weight, Node::filter(redraw(&sub, n, rng)?)));
        }
        super::renormalize(&mut edges);
        options.push(Node::mixture(edges));
    }

    report.splits += 1;
    match options.len() {
        0 => {
            report.splits -= 1;
            report.local_resamples += 1;
            Ok(Node::filter(redraw(cloud, cloud.len(), rng)?))
        }
        1 => Ok(options.pop().expect("one option")),
        n => {
            let w = 1.0 / n as f64;
            Ok(Node::decision(options.into_iter().map(|o| Edge::new(w, o)).collect()))
        }
    }
}

/// Splits a cloud into `k` weighted k-means clusters, each renormalized,
/// paired with its share of the total weight. `None` when the cloud has
/// fewer than `k` distinct points, clustering fails to converge, or a
/// cluster ends up with no weight or fewer than two distinct particles.
pub(crate) fn partition(
    cloud: &ParticleCloud,
    k: usize,
    cfg: &GlobalConfig,
    rng: &mut dyn RngCore,
) -> Result<Option<Vec<(f64, ParticleCloud)>>> {
    if cloud.distinct_count(k) < k {
        return Ok(None);
    }
    let clustering = match weighted_kmeans_best(
        cloud.raw_particles(),
        cloud.dim(),
        cloud.weights(),
        k,
        cfg.kmeans_max_iters,
        cfg.kmeans_restarts,
        rng,
    ) {
        Ok(c) => c,
        Err(e @ (Error::MaxItersExceeded(_) | Error::TooFewDistinctPoints { .. })) => {
            debug!("clustering candidate k={k} skipped: {e}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let mut parts = Vec::with_capacity(k);
    for members in clustering.members() {
        let mass: f64 = crate::numeric::compensated_sum(members.iter().map(|&i| cloud.weights()[i]));
        if members.is_empty() || !(mass > 0.0) {
            debug!("clustering candidate k={k} skipped: weightless cluster");
            return Ok(None);
        }
        let sub = cloud.restrict(&members)?;
        if sub.distinct_count(2) < 2 {
            debug!("clustering candidate k={k} skipped: cluster collapsed to one point");
            return Ok(None);
        }
        parts.push((mass, sub));
    }
    Ok(Some(parts))
}
