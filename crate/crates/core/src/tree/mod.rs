//! The structure tree: a rooted tree of particle filters (leaves), mixture
//! nodes and decision (model-selection) nodes with weighted edges.
//!
//! The posterior represented by a tree is the flattened cloud: each leaf
//! particle weighted by its local weight times the product of the edge
//! weights on its root path. Decision nodes carry the same arithmetic as
//! mixtures, but their edge weights are read as posterior odds between
//! competing structural hypotheses and are pruned accordingly.

mod context;
mod export;
mod prune;
mod region;
mod split;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Experiment, ExperimentModel};
use crate::numeric::compensated_sum;
use crate::smc::{LiuWest, ParticleCloud};

pub use context::{Context, ContextField, ContextValue};
pub use export::{EdgeRecord, FilterRecord, NodeRecord, TreeSnapshot};
pub use region::{Ellipsoid, RegionEstimate};
pub use split::ResampleReport;

/// Tolerance for "outgoing edge weights sum to one".
pub const EDGE_SUM_TOL: f64 = 1e-12;

/// Parameters shared by the whole tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    /// Maximum depth (edges from the root) of any node.
    pub d_max: usize,
    /// Cluster counts tried by each splitting move.
    pub n_cluster_set: Vec<usize>,
    /// Particles drawn from the prior at initialization.
    pub n_part: usize,
    /// Minimum particle count of a freshly split cluster.
    pub n_min_part: usize,
    /// A leaf is resampled when `ess / n` drops below this.
    pub resample_threshold: f64,
    pub liu_west: LiuWest,
    pub kmeans_max_iters: usize,
    /// Independent k-means++ seedings per clustering candidate.
    pub kmeans_restarts: usize,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            d_max: 4,
            n_cluster_set: vec![1, 2],
            n_part: 2000,
            n_min_part: 250,
            resample_threshold: 0.5,
            liu_west: LiuWest::default(),
            kmeans_max_iters: crate::clustering::DEFAULT_MAX_ITERS,
            kmeans_restarts: crate::clustering::DEFAULT_RESTARTS,
        }
    }
}

impl GlobalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max < 1 {
            return Err(Error::Config("d_max must be at least 1".into()));
        }
        if self.n_cluster_set.is_empty() || self.n_cluster_set.contains(&0) {
            return Err(Error::Config("cluster counts must be nonempty and >= 1".into()));
        }
        if self.n_part < 1 {
            return Err(Error::Config("n_part must be at least 1".into()));
        }
        if self.n_min_part > self.n_part {
            return Err(Error::Config("n_min_part cannot exceed n_part".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::Config("resample threshold must lie in [0, 1]".into()));
        }
        LiuWest::new(self.liu_west.a)?;
        Ok(())
    }

    /// Extra depth a splitting move adds below the split leaf.
    fn split_growth(&self) -> usize {
        if self.n_cluster_set.iter().any(|&k| k > 1) {
            2
        } else {
            1
        }
    }

    /// Whether a leaf at `depth` may be split without any new node
    /// exceeding `d_max`.
    pub fn can_split_at(&self, depth: usize) -> bool {
        depth < self.d_max && depth + self.split_growth() <= self.d_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Mixture,
    Decision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Filter,
    Mixture,
    Decision,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeBody {
    Filter(ParticleCloud),
    Branch { kind: BranchKind, children: Vec<Edge> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub context: Context,
    pub body: NodeBody,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub weight: f64,
    pub node: Node,
}

impl Edge {
    pub fn new(weight: f64, node: Node) -> Self {
        Self { weight, node }
    }
}

impl Node {
    pub fn filter(cloud: ParticleCloud) -> Self {
        Self {
            context: Context::default(),
            body: NodeBody::Filter(cloud),
        }
    }

    pub fn branch(kind: BranchKind, children: Vec<Edge>) -> Self {
        Self {
            context: Context::default(),
            body: NodeBody::Branch { kind, children },
        }
    }

    pub fn mixture(children: Vec<Edge>) -> Self {
        Self::branch(BranchKind::Mixture, children)
    }

    pub fn decision(children: Vec<Edge>) -> Self {
        Self::branch(BranchKind::Decision, children)
    }

    pub fn with_context(mut self, context: Context) -> Self {
        self.context = context;
        self
    }

    pub fn kind(&self) -> NodeKind {
        match &self.body {
            NodeBody::Filter(_) => NodeKind::Filter,
            NodeBody::Branch {
                kind: BranchKind::Mixture,
                ..
            } => NodeKind::Mixture,
            NodeBody::Branch {
                kind: BranchKind::Decision,
                ..
            } => NodeKind::Decision,
        }
    }

    pub fn children(&self) -> &[Edge] {
        match &self.body {
            NodeBody::Filter(_) => &[],
            NodeBody::Branch { children, .. } => children,
        }
    }

    pub fn cloud(&self) -> Option<&ParticleCloud> {
        match &self.body {
            NodeBody::Filter(c) => Some(c),
            NodeBody::Branch { .. } => None,
        }
    }

    fn child(&self, index: usize) -> Option<&Node> {
        self.children().get(index).map(|e| &e.node)
    }
}

/// Rescales edge weights to sum to one. Returns the old sum.
pub(crate) fn renormalize(children: &mut [Edge]) -> f64 {
    let s = compensated_sum(children.iter().map(|e| e.weight));
    if s > 0.0 {
        for e in children.iter_mut() {
            e.weight /= s;
        }
    }
    s
}

/// Summary of one filter leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafInfo {
    /// Child indices from the root.
    pub path: Vec<usize>,
    /// Product of edge weights from the root.
    pub bayes_factor: f64,
    pub depth: usize,
    pub n_particles: usize,
    pub ess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureTree {
    root: Node,
    config: GlobalConfig,
}

impl StructureTree {
    /// A decision root over a single filter holding `n_part` prior draws.
    pub fn new<F>(mut prior: F, config: GlobalConfig, root_context: Context, rng: &mut dyn RngCore) -> Result<Self>
    where
        F: FnMut(&mut dyn RngCore) -> Vec<f64>,
    {
        config.validate()?;
        root_context.validate()?;
        let first = prior(rng);
        let dim = first.len();
        let mut flat = Vec::with_capacity(config.n_part * dim);
        flat.extend_from_slice(&first);
        for _ in 1..config.n_part {
            flat.extend(prior(rng));
        }
        let cloud = ParticleCloud::uniform(dim, flat)?;
        let root = Node::decision(vec![Edge::new(1.0, Node::filter(cloud))]).with_context(root_context);
        Ok(Self { root, config })
    }

    /// Wraps an existing root; it must pass [`StructureTree::audit`].
    pub fn from_root(root: Node, config: GlobalConfig) -> Result<Self> {
        config.validate()?;
        let tree = Self { root, config };
        tree.audit().map_err(Error::Config)?;
        Ok(tree)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn config(&self) -> &GlobalConfig {
        &self.config
    }

    pub fn node(&self, path: &[usize]) -> Option<&Node> {
        path.iter().try_fold(&self.root, |n, &i| n.child(i))
    }

    /// The context in force at the node: explicit fields on the path, nearest wins.
    pub fn resolve_context(&self, path: &[usize]) -> Result<Context> {
        let mut node = &self.root;
        let mut ctx = node.context.clone();
        for &i in path {
            node = node.child(i).ok_or_else(|| Error::NoSuchNode(path.to_vec()))?;
            ctx = ctx.overlay(&node.context);
        }
        Ok(ctx)
    }

    pub fn resolve_field(&self, path: &[usize], field: ContextField) -> Result<ContextValue> {
        self.resolve_context(path)?
            .get(field)
            .ok_or(Error::UnsetContextField(field.name()))
    }

    /// Every filter leaf in pre-order.
    pub fn leaves(&self) -> Vec<LeafInfo> {
        fn walk(node: &Node, path: &mut Vec<usize>, bf: f64, out: &mut Vec<LeafInfo>) {
            match &node.body {
                NodeBody::Filter(c) => out.push(LeafInfo {
                    path: path.clone(),
                    bayes_factor: bf,
                    depth: path.len(),
                    n_particles: c.len(),
                    ess: c.ess(),
                }),
                NodeBody::Branch { children, .. } => {
                    for (i, e) in children.iter().enumerate() {
                        path.push(i);
                        walk(&e.node, path, bf * e.weight, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), 1.0, &mut out);
        out
    }

    /// Product of the edge weights from the root to the node at `path`.
    pub fn node_bayes_factor(&self, path: &[usize]) -> Result<f64> {
        let mut node = &self.root;
        let mut bf = 1.0;
        for &i in path {
            let e = node.children().get(i).ok_or_else(|| Error::NoSuchNode(path.to_vec()))?;
            bf *= e.weight;
            node = &e.node;
        }
        Ok(bf)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn total_particles(&self) -> usize {
        self.leaves().iter().map(|l| l.n_particles).sum()
    }

    /// Depth of the deepest node, counted in edges from the root.
    pub fn depth(&self) -> usize {
        fn walk(n: &Node, d: usize) -> usize {
            n.children().iter().map(|e| walk(&e.node, d + 1)).max().unwrap_or(d)
        }
        walk(&self.root, 0)
    }

    /// The model-averaged posterior over every leaf.
    pub fn flatten(&self) -> ParticleCloud {
        flatten_node(&self.root, false)
    }

    /// The posterior conditioned on the champion branch of every decision node.
    pub fn flatten_champion(&self) -> ParticleCloud {
        flatten_node(&self.root, true)
    }

    /// Paths of the leaves reached by following the heaviest child at each
    /// decision node and every child at mixture nodes.
    pub fn champion_leaves(&self) -> Vec<Vec<usize>> {
        fn walk(n: &Node, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match &n.body {
                NodeBody::Filter(_) => out.push(path.clone()),
                NodeBody::Branch { kind, children } => {
                    let picks: Vec<usize> = match kind {
                        BranchKind::Mixture => (0..children.len()).collect(),
                        BranchKind::Decision => vec![heaviest(children)],
                    };
                    for i in picks {
                        path.push(i);
                        walk(&children[i].node, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Bayes update of every leaf followed by pushing the per-node evidence
    /// up the tree, children before parents.
    ///
    /// Returns the total evidence of the datum under the tree. If that
    /// evidence is zero the tree is left untouched and [`Error::EmptyTree`]
    /// is returned.
    pub fn update(&mut self, model: &dyn ExperimentModel, outcome: usize, experiment: &Experiment) -> Result<f64> {
        self.update_with(&|x: &[f64]| model.likelihood(outcome, x, experiment))
    }

    pub fn update_with(&mut self, likelihood: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        let mut per_leaf = Vec::new();
        let evidence = collect_likelihoods(&self.root, likelihood, &mut per_leaf);
        if !(evidence > 0.0) {
            return Err(Error::EmptyTree);
        }
        let mut iter = per_leaf.into_iter();
        let root_sum = apply_update(&mut self.root, &mut iter);
        debug_assert!(iter.next().is_none());
        if !(root_sum > 0.0) {
            return Err(Error::EmptyTree);
        }
        Ok(evidence)
    }

    /// Checks every structural invariant; returns a description of the
    /// first violation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        if self.root.kind() != NodeKind::Decision {
            return Err("root is not a decision node".into());
        }
        fn walk(n: &Node, depth: usize, d_max: usize, path: &mut Vec<usize>) -> std::result::Result<(), String> {
            if depth > d_max {
                return Err(format!("node {path:?} at depth {depth} exceeds d_max {d_max}"));
            }
            match &n.body {
                NodeBody::Filter(c) => {
                    if c.is_empty() {
                        return Err(format!("filter {path:?} is empty"));
                    }
                    let s: f64 = compensated_sum(c.weights().iter().copied());
                    if (s - 1.0).abs() > EDGE_SUM_TOL {
                        return Err(format!("filter {path:?} weights sum to {s}"));
                    }
                }
                NodeBody::Branch { children, .. } => {
                    if children.is_empty() {
                        return Err(format!("branch {path:?} has no children"));
                    }
                    let s = compensated_sum(children.iter().map(|e| e.weight));
                    if (s - 1.0).abs() > EDGE_SUM_TOL {
                        return Err(format!("edges below {path:?} sum to {s}"));
                    }
                    for (i, e) in children.iter().enumerate() {
                        if !(0.0..=1.0).contains(&e.weight) {
                            return Err(format!("edge {path:?}->{i} has weight {}", e.weight));
                        }
                        path.push(i);
                        walk(&e.node, depth + 1, d_max, path)?;
                        path.pop();
                    }
                }
            }
            Ok(())
        }
        walk(&self.root, 0, self.config.d_max, &mut Vec::new())
    }

    pub(crate) fn root_mut(&mut self) -> &mut Node {
        &mut self.root
    }
}

/// First index of the largest edge weight.
pub(crate) fn heaviest(children: &[Edge]) -> usize {
    let mut best = 0;
    for (i, e) in children.iter().enumerate() {
        if e.weight > children[best].weight {
            best = i;
        }
    }
    best
}

fn flatten_node(root: &Node, champion_only: bool) -> ParticleCloud {
    fn walk(n: &Node, scale: f64, champion_only: bool, dim: &mut usize, xs: &mut Vec<f64>, ws: &mut Vec<f64>) {
        match &n.body {
            NodeBody::Filter(c) => {
                *dim = c.dim();
                xs.extend_from_slice(c.raw_particles());
                ws.extend(c.weights().iter().map(|w| w * scale));
            }
            NodeBody::Branch { kind, children } => {
                if champion_only && *kind == BranchKind::Decision {
                    let e = &children[heaviest(children)];
                    walk(&e.node, scale, champion_only, dim, xs, ws);
                } else {
                    for e in children {
                        walk(&e.node, scale * e.weight, champion_only, dim, xs, ws);
                    }
                }
            }
        }
    }
    let (mut dim, mut xs, mut ws) = (0, Vec::new(), Vec::new());
    walk(root, 1.0, champion_only, &mut dim, &mut xs, &mut ws);
    ParticleCloud::new(dim, xs, ws).expect("a valid tree flattens to a valid cloud")
}

fn collect_likelihoods(n: &Node, lik: &dyn Fn(&[f64]) -> f64, out: &mut Vec<Vec<f64>>) -> f64 {
    match &n.body {
        NodeBody::Filter(c) => {
            let l: Vec<f64> = c.particles().map(lik).collect();
            let z = compensated_sum(c.weights().iter().zip(&l).map(|(w, l)| w * l));
            out.push(l);
            z
        }
        NodeBody::Branch { children, .. } => compensated_sum(
            children
                .iter()
                .map(|e| e.weight * collect_likelihoods(&e.node, lik, out)),
        ),
    }
}

/// Post-order update. Returns the factor for the node's incoming edge.
fn apply_update(n: &mut Node, liks: &mut impl Iterator<Item = Vec<f64>>) -> f64 {
    match &mut n.body {
        NodeBody::Filter(c) => {
            let l = liks.next().expect("one likelihood vector per leaf");
            // A leaf that rules the datum out keeps its particles; its
            // incoming edge drops to zero and floor pruning removes it.
            c.bayes_update(&l).unwrap_or(0.0)
        }
        NodeBody::Branch { children, .. } => {
            for e in children.iter_mut() {
                let z = apply_update(&mut e.node, liks);
                e.weight *= z;
            }
            renormalize(children)
        }
    }
}
