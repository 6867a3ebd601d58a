//! Pruning: champion and floor rules remove subtrees, the only-child and
//! single-child rules remove redundant intermediate nodes.

use super::{heaviest, renormalize, BranchKind, Context, Edge, Node, NodeBody, StructureTree};
use crate::error::Result;

/// What a pruned subtree hands back to its parent.
struct Replacement {
    edges: Vec<Edge>,
    /// Set when the node dissolved into its parent, which takes this kind.
    adopt: Option<BranchKind>,
}

impl StructureTree {
    /// One pruning sweep in rule order: champion, floor, only-child,
    /// single-child. Each rule fires only where the resolved `prune` is true.
    pub fn prune(&mut self) -> Result<()> {
        self.prune_with(true)
    }

    fn prune_with(&mut self, subtractive: bool) -> Result<()> {
        let saved = self.root().clone();
        let root = self.root_mut();
        let ctx = root.context.clone();
        let NodeBody::Branch { kind, children } = &mut root.body else {
            unreachable!("root is always a decision node");
        };
        match prune_children(*kind, children, &ctx, true, subtractive) {
            Ok(k) => {
                debug_assert_eq!(k, BranchKind::Decision);
                *kind = k;
                Ok(())
            }
            Err(e) => {
                *root = saved;
                Err(e)
            }
        }
    }

    /// Only the representational rules (only-child and single-child),
    /// which leave the flattened posterior unchanged.
    pub fn prune_representational(&mut self) -> Result<()> {
        self.prune_with(false)
    }
}

/// Applies the local rules at a branch with resolved context `ctx`, then
/// prunes each child. Returns the (possibly adopted) kind of the branch.
fn prune_children(
    kind: BranchKind,
    children: &mut Vec<Edge>,
    ctx: &Context,
    is_root: bool,
    subtractive: bool,
) -> Result<BranchKind> {
    let prune = ctx.require_prune()?;
    if prune && subtractive {
        // Mixture weights are cluster masses, not model odds.
        if kind == BranchKind::Decision {
            champion_rule(children, ctx.require_champion_threshold()?);
        }
        let floor = match kind {
            BranchKind::Decision => ctx.require_decision_floor()?,
            BranchKind::Mixture => ctx.require_mixture_floor()?,
        };
        floor_rule(children, floor);
    }

    let sole = children.len() == 1;
    let mut kind = kind;
    let mut rebuilt = Vec::with_capacity(children.len());
    for edge in children.drain(..) {
        let r = prune_subtree(edge, sole, is_root, ctx, subtractive)?;
        if let Some(k) = r.adopt {
            kind = k;
        }
        rebuilt.extend(r.edges);
    }
    *children = rebuilt;
    Ok(kind)
}

fn prune_subtree(
    edge: Edge,
    only_child: bool,
    parent_is_root: bool,
    inherited: &Context,
    subtractive: bool,
) -> Result<Replacement> {
    let Edge { weight, node } = edge;
    let Node { context, body } = node;
    let NodeBody::Branch { kind, mut children } = body else {
        return Ok(Replacement {
            edges: vec![Edge::new(weight, Node { context, body })],
            adopt: None,
        });
    };
    let ctx = inherited.overlay(&context);
    let kind = prune_children(kind, &mut children, &ctx, false, subtractive)?;

    if ctx.require_prune()? {
        let dissolve = only_child && !(parent_is_root && kind == BranchKind::Mixture);
        if dissolve {
            push_context_down(&context, &mut children);
            return Ok(Replacement {
                edges: children,
                adopt: Some(kind),
            });
        }
        if children.len() == 1 {
            push_context_down(&context, &mut children);
            let mut child = children.pop().expect("one child");
            child.weight = weight;
            return Ok(Replacement {
                edges: vec![child],
                adopt: None,
            });
        }
    }
    Ok(Replacement {
        edges: vec![Edge::new(
            weight,
            Node {
                context,
                body: NodeBody::Branch { kind, children },
            },
        )],
        adopt: None,
    })
}

/// A removed node's explicit settings keep governing its former subtree.
fn push_context_down(removed: &Context, children: &mut [Edge]) {
    if removed.is_empty() {
        return;
    }
    for e in children {
        e.node.context = removed.overlay(&e.node.context);
    }
}

/// Keeps only the heaviest child when its odds against the rest exceed `k`.
pub(crate) fn champion_rule(children: &mut Vec<Edge>, k: f64) {
    if children.len() < 2 {
        return;
    }
    let best = heaviest(children);
    let w = children[best].weight;
    let champion = w >= 1.0 || w / (1.0 - w) > k;
    if champion {
        let mut keep = children.swap_remove(best);
        keep.weight = 1.0;
        children.clear();
        children.push(keep);
    }
}

/// Drops children whose weight is below `floor` (and zero-weight children),
/// never the heaviest one, then renormalizes.
pub(crate) fn floor_rule(children: &mut Vec<Edge>, floor: f64) {
    if children.is_empty() {
        return;
    }
    let best = heaviest(children);
    let before = children.len();
    let mut i = 0;
    children.retain(|e| {
        let idx = i;
        i += 1;
        idx == best || (e.weight >= floor && e.weight > 0.0)
    });
    if children.len() < before {
        renormalize(children);
    }
}
