//! JSON snapshots and Graphviz DOT rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Context, GlobalConfig, Node, NodeKind, StructureTree};
use crate::error::{Error, Result};
use crate::smc::ParticleCloud;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub dim: usize,
    pub n_particles: usize,
    pub ess: f64,
    pub mean: Vec<f64>,
    /// Row-major particle positions; omitted from summary snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub weight: f64,
    pub node: NodeRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub kind: NodeKind,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Context::is_empty")]
    pub context: Context,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub config: GlobalConfig,
    pub root: NodeRecord,
}

impl StructureTree {
    pub fn snapshot(&self, step: Option<usize>, include_particles: bool) -> TreeSnapshot {
        TreeSnapshot {
            step,
            config: self.config().clone(),
            root: record(self.root(), 0, include_particles),
        }
    }

    /// Rebuilds a tree from a snapshot taken with particles included.
    pub fn from_snapshot(snapshot: &TreeSnapshot) -> Result<Self> {
        Self::from_root(rebuild(&snapshot.root)?, snapshot.config.clone())
    }

    pub fn to_dot(&self) -> String {
        self.snapshot(None, false).to_dot()
    }
}

impl TreeSnapshot {
    /// Graphviz source: filters are squares annotated with particle count
    /// and ESS, mixtures triangles, decisions circles; edges carry weights.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph structure_tree {\n");
        let mut next = 0usize;
        dot_node(&self.root, &mut next, &mut out);
        out.push_str("}\n");
        out
    }
}

fn record(n: &Node, depth: usize, include_particles: bool) -> NodeRecord {
    let filter = n.cloud().map(|c| FilterRecord {
        dim: c.dim(),
        n_particles: c.len(),
        ess: c.ess(),
        mean: c.moments().mean.iter().copied().collect(),
        particles: include_particles.then(|| c.raw_particles().to_vec()),
        weights: include_particles.then(|| c.weights().to_vec()),
    });
    NodeRecord {
        kind: n.kind(),
        depth,
        context: n.context.clone(),
        filter,
        children: n
            .children()
            .iter()
            .map(|e| EdgeRecord {
                weight: e.weight,
                node: record(&e.node, depth + 1, include_particles),
            })
            .collect(),
    }
}

fn rebuild(r: &NodeRecord) -> Result<Node> {
    let node = match r.kind {
        NodeKind::Filter => {
            let f = r
                .filter
                .as_ref()
                .ok_or_else(|| Error::Config("filter record without particles".into()))?;
            let (Some(xs), Some(ws)) = (&f.particles, &f.weights) else {
                return Err(Error::Config("snapshot was taken without particles".into()));
            };
            Node::filter(ParticleCloud::from_normalized(f.dim, xs.clone(), ws.clone())?)
        }
        NodeKind::Mixture | NodeKind::Decision => {
            let children = r
                .children
                .iter()
                .map(|e| Ok(super::Edge::new(e.weight, rebuild(&e.node)?)))
                .collect::<Result<Vec<_>>>()?;
            if r.kind == NodeKind::Mixture {
                Node::mixture(children)
            } else {
                Node::decision(children)
            }
        }
    };
    Ok(node.with_context(r.context.clone()))
}

fn dot_node(r: &NodeRecord, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let attrs = match (&r.kind, &r.filter) {
        (NodeKind::Filter, Some(f)) => format!("shape=square, label=\"n={}\\nESS={:.1}\"", f.n_particles, f.ess),
        (NodeKind::Filter, None) => "shape=square, label=\"\"".to_string(),
        (NodeKind::Mixture, _) => "shape=triangle, label=\"\"".to_string(),
        (NodeKind::Decision, _) => "shape=circle, label=\"\"".to_string(),
    };
    let _ = writeln!(out, "  n{id} [{attrs}];");
    for e in &r.children {
        let child = dot_node(&e.node, next, out);
        let _ = writeln!(out, "  n{id} -> n{child} [label=\"{:.4}\"];", e.weight);
    }
    id
}
