//! Adaptive experiment design: the particle guess heuristic applied to the
//! filter leaf with the smallest Bayes factor.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Experiment;
use crate::numeric::cholesky_jittered;
use crate::smc::ParticleCloud;
use crate::tree::{LeafInfo, StructureTree};

/// Attempts at drawing a second particle distinct from the first.
pub const DISTINCT_DRAW_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PghConfig {
    pub constant: f64,
    /// Power of the particle distance in `t = c / d^p`; 1 or 2.
    pub exponent: u32,
    pub t_max: f64,
}

impl Default for PghConfig {
    fn default() -> Self {
        Self {
            constant: 1.0,
            exponent: 1,
            t_max: 1e8,
        }
    }
}

impl PghConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.constant > 0.0 && self.constant.is_finite()) {
            return Err(Error::Config(format!(
                "PGH constant {} must be positive",
                self.constant
            )));
        }
        if !matches!(self.exponent, 1 | 2) {
            return Err(Error::Config(format!("PGH exponent {} must be 1 or 2", self.exponent)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config("t_max must be positive".into()));
        }
        Ok(())
    }
}

/// The leaf with the smallest positive root-path weight product; ties go
/// to the first leaf in traversal order.
pub fn select_design_node(tree: &StructureTree) -> Option<LeafInfo> {
    let mut best: Option<LeafInfo> = None;
    for leaf in tree.leaves() {
        if !(leaf.bayes_factor > 0.0) {
            continue;
        }
        if best.as_ref().is_none_or(|b| leaf.bayes_factor < b.bayes_factor) {
            best = Some(leaf);
        }
    }
    best
}

/// Draws two distinct particles by weight and returns `t = c / ‖x₁ − x₂‖^p`
/// with `θ` the first coordinate of the second draw.
pub fn pgh(cloud: &ParticleCloud, cfg: &PghConfig, rng: &mut dyn RngCore) -> Result<Experiment> {
    let index = WeightedIndex::new(cloud.weights()).map_err(|e| Error::InvalidWeights(e.to_string()))?;
    let i = index.sample(rng);
    let x1 = cloud.particle(i);
    for _ in 0..DISTINCT_DRAW_ATTEMPTS {
        let x2 = cloud.particle(index.sample(rng));
        if x2 == x1 {
            continue;
        }
        let dist = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let t = cfg.constant / dist.powi(cfg.exponent as i32);
        return Ok(Experiment {
            t: cap(t, cfg.t_max),
            theta: x2[0],
        });
    }
    Err(Error::DegenerateCloud)
}

/// `t = c / sqrt(tr Σ)` using the jittered covariance, `θ` the mean's
/// first coordinate. Used when [`pgh`] cannot find two distinct particles.
pub fn pgh_fallback(cloud: &ParticleCloud, cfg: &PghConfig) -> Result<Experiment> {
    let m = cloud.moments();
    let l = cholesky_jittered(&m.covariance)?;
    let trace = (&l * l.transpose()).trace();
    Ok(Experiment {
        t: cap(cfg.constant / trace.sqrt(), cfg.t_max),
        theta: m.mean[0],
    })
}

/// Design for the next measurement: PGH on the minimum-Bayes-factor leaf.
pub fn design_experiment(tree: &StructureTree, cfg: &PghConfig, rng: &mut dyn RngCore) -> Result<Experiment> {
    let leaf = select_design_node(tree).ok_or(Error::EmptyTree)?;
    let cloud = tree
        .node(&leaf.path)
        .and_then(|n| n.cloud())
        .ok_or_else(|| Error::NoSuchNode(leaf.path.clone()))?;
    match pgh(cloud, cfg, rng) {
        Err(Error::DegenerateCloud) => pgh_fallback(cloud, cfg),
        other => other,
    }
}

fn cap(t: f64, t_max: f64) -> f64 {
    if t.is_finite() {
        t.min(t_max)
    } else {
        t_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::testing::random_tree;
    use crate::tree::{Context, Edge, GlobalConfig, Node};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn leaf(xs: &[f64]) -> Node {
        Node::filter(ParticleCloud::uniform(1, xs.to_vec()).unwrap())
    }

    fn tree(root: Node) -> StructureTree {
        StructureTree::from_root(root.with_context(Context::root_defaults()), GlobalConfig::default()).unwrap()
    }

    #[test]
    fn single_leaf_is_selected() {
        let t = tree(Node::decision(vec![Edge::new(1.0, leaf(&[0.0]))]));
        assert_eq!(select_design_node(&t).unwrap().path, vec![0]);
    }

    #[test]
    fn lightest_leaf_is_selected() {
        let t = tree(Node::decision(vec![
            Edge::new(0.9, leaf(&[0.0])),
            Edge::new(0.1, leaf(&[1.0])),
        ]));
        assert_eq!(select_design_node(&t).unwrap().path, vec![1]);
    }

    #[test]
    fn selection_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = random_tree(&mut rng, 4, 6, 3);
            // oracle: walk every root path and multiply edge weights
            fn paths(n: &Node, p: Vec<usize>, bf: f64, out: &mut Vec<(Vec<usize>, f64)>) {
                if n.children().is_empty() {
                    out.push((p, bf));
                    return;
                }
                for (i, e) in n.children().iter().enumerate() {
                    let mut q = p.clone();
                    q.push(i);
                    paths(&e.node, q, bf * e.weight, out);
                }
            }
            let mut all = Vec::new();
            paths(t.root(), Vec::new(), 1.0, &mut all);
            let min = all.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            let expect = all.iter().find(|x| x.1 == min).unwrap().0.clone();
            assert_eq!(select_design_node(&t).unwrap().path, expect);
        }
    }

    #[test]
    fn selection_invariant_under_representational_prunes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = random_tree(&mut rng, 4, 6, 3);
            let before = select_design_node(&t).unwrap();
            let mut p = t.clone();
            p.prune_representational().unwrap();
            let after = select_design_node(&p).unwrap();
            assert!((before.bayes_factor - after.bayes_factor).abs() < 1e-15);
            let cb = t.node(&before.path).unwrap().cloud().unwrap();
            let ca = p.node(&after.path).unwrap().cloud().unwrap();
            assert_eq!(cb, ca);
        }
    }

    #[test]
    fn unit_distance_gives_unit_time() {
        let cloud = ParticleCloud::from_points(&[vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = pgh(&cloud, &PghConfig::default(), &mut rng).unwrap();
        assert_eq!(e.t, 1.0);
        let doubled = PghConfig {
            constant: 2.0,
            ..PghConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(pgh(&cloud, &doubled, &mut rng).unwrap().t, 2.0);
    }

    #[test]
    fn theta_is_second_draw() {
        let cloud = ParticleCloud::uniform(1, vec![0.2, 0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let e = pgh(&cloud, &PghConfig::default(), &mut rng).unwrap();
            assert!((e.t - 2.0).abs() < 1e-12);
            assert!(e.theta == 0.2 || e.theta == 0.7);
        }
    }

    #[test]
    fn squared_exponent() {
        let cloud = ParticleCloud::uniform(1, vec![0.0, 0.5]).unwrap();
        let cfg = PghConfig {
            exponent: 2,
            ..PghConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(pgh(&cloud, &cfg, &mut rng).unwrap().t, 4.0);
    }

    #[test]
    fn collapsed_cloud_falls_back_and_caps() {
        let cloud = ParticleCloud::uniform(1, vec![0.3; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            pgh(&cloud, &PghConfig::default(), &mut rng),
            Err(Error::DegenerateCloud)
        ));
        let t = tree(Node::decision(vec![Edge::new(1.0, Node::filter(cloud))]));
        let e = design_experiment(&t, &PghConfig::default(), &mut rng).unwrap();
        assert!(e.t.is_finite() && e.t > 0.0 && e.t <= 1e8);
    }

    #[test]
    fn tight_cloud_is_capped() {
        let cloud = ParticleCloud::uniform(1, vec![0.0, 1e-300]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = pgh(&cloud, &PghConfig::default(), &mut rng).unwrap();
        assert_eq!(e.t, 1e8);
    }

    #[test]
    fn deterministic_under_seed() {
        let cloud = ParticleCloud::uniform(1, (0..50).map(|i| i as f64 * 0.01).collect()).unwrap();
        let a = pgh(&cloud, &PghConfig::default(), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = pgh(&cloud, &PghConfig::default(), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }
}
