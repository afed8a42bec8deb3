use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{MGraph, NodeId, NodeKind};

/// Structural evidence that a variable's mechanism is entangled with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// `X` and `R_X` are adjacent (directly, or through a shared latent).
    Neighbors { var: String, mechanism: String },
    /// `X … R_X` through colliders only; `path` runs from `X` to `R_X`.
    ColliderPath { var: String, path: Vec<String> },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Neighbors { var, mechanism } => {
                write!(f, "{var} and {mechanism} are neighbors")
            }
            Witness::ColliderPath { var, path } => {
                write!(f, "collider path from {var}: {}", path.join(" - "))
            }
        }
    }
}

/// Arrowhead structure of a graph with root latents projected away: a
/// latent with no parents becomes a bidirected edge between each pair of its
/// children.
pub(crate) struct Marks<'a> {
    g: &'a MGraph,
    bi: BTreeSet<(NodeId, NodeId)>,
}

impl<'a> Marks<'a> {
    pub fn new(g: &'a MGraph) -> Self {
        let mut bi = BTreeSet::new();
        for (a, b) in g.bidirected_edges() {
            bi.insert((a, b));
            bi.insert((b, a));
        }
        for v in g.ids() {
            if g.kind(v) == NodeKind::Latent && g.parents(v).is_empty() {
                let ch = g.children(v);
                for &a in ch {
                    for &b in ch {
                        if a != b {
                            bi.insert((a, b));
                        }
                    }
                }
            }
        }
        Marks { g, bi }
    }

    pub fn bidirected(&self, a: NodeId, b: NodeId) -> bool {
        self.bi.contains(&(a, b))
    }

    /// Some edge between `a` and `b` has an arrowhead at `b`.
    pub fn into(&self, a: NodeId, b: NodeId) -> bool {
        self.g.has_edge(a, b) || self.bidirected(a, b)
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.g.has_edge(a, b) || self.g.has_edge(b, a) || self.bidirected(a, b)
    }

    /// Shortest path `x, w_1, …, w_k, r` (k ≥ 1) in which every `w_i` is a
    /// collider and satisfies `allowed`.
    pub fn collider_path(
        &self,
        x: NodeId,
        r: NodeId,
        allowed: impl Fn(NodeId) -> bool,
    ) -> Option<Vec<NodeId>> {
        let n = self.g.len();
        let mut prev: Vec<Option<NodeId>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for w in self.g.ids() {
            if w != x && w != r && allowed(w) && self.into(x, w) {
                seen[w.index()] = true;
                queue.push_back(w);
            }
        }
        while let Some(w) = queue.pop_front() {
            if self.into(r, w) {
                let mut path = vec![r, w];
                let mut cur = w;
                while let Some(p) = prev[cur.index()] {
                    path.push(p);
                    cur = p;
                }
                path.push(x);
                path.reverse();
                return Some(path);
            }
            for v in self.g.ids() {
                if !seen[v.index()] && v != x && v != r && allowed(v) && self.bidirected(w, v) {
                    seen[v.index()] = true;
                    prev[v.index()] = Some(w);
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Neighbor or collider-path witness for `var` against its mechanism.
    pub fn witness(&self, var: &str, allowed: impl Fn(NodeId) -> bool) -> Option<Witness> {
        let g = self.g;
        let x = g.id(var)?;
        let r = g.id(&g.mechanism_of(var)?)?;
        if self.adjacent(x, r) {
            return Some(Witness::Neighbors {
                var: var.to_string(),
                mechanism: g.name(r).to_string(),
            });
        }
        self.collider_path(x, r, allowed)
            .map(|p| Witness::ColliderPath {
                var: var.to_string(),
                path: p.into_iter().map(|v| g.name(v).to_string()).collect(),
            })
    }
}
