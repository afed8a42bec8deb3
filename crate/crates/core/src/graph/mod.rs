//! Missingness graphs.
//!
//! An [`MGraph`] is a DAG whose nodes are split into five kinds: fully
//! observed variables, partially observed variables, latent variables,
//! missingness mechanisms (`R_X`) and proxies (`X*`). Declaring a variable as
//! partially observed synthesizes its mechanism and proxy together with the
//! two masking edges `X -> X*` and `R_X -> X*`.
//!
//! Bidirected edges `A <-> B` stand for an unnamed latent common parent; see
//! [`expand_latents`] for the explicit form.

mod format;

pub(crate) use format::parse_document;
pub use format::{parse_mgraph, serialize_mgraph, SyntaxError, SyntaxErrorKind};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved marker a proxy takes when its variable is masked.
pub const MISSING: &str = "NA";

/// Prefix of mechanism names: the mechanism of `X` is `R_X`.
pub const MECHANISM_PREFIX: &str = "R_";

/// Suffix of proxy names: the proxy of `X` is `X*`.
pub const PROXY_SUFFIX: &str = "*";

pub fn mechanism_name(var: &str) -> String {
    format!("{MECHANISM_PREFIX}{var}")
}

pub fn proxy_name(var: &str) -> String {
    format!("{var}{PROXY_SUFFIX}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    FullyObserved,
    PartiallyObserved,
    Latent,
    Mechanism,
    Proxy,
}

impl NodeKind {
    /// Substantive nodes are the ones a causal model talks about:
    /// observed, partially observed and latent variables.
    pub fn is_substantive(self) -> bool {
        matches!(
            self,
            NodeKind::FullyObserved | NodeKind::PartiallyObserved | NodeKind::Latent
        )
    }

    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::FullyObserved => "obs",
            NodeKind::PartiallyObserved => "partial",
            NodeKind::Latent => "latent",
            NodeKind::Mechanism => "mechanism",
            NodeKind::Proxy => "proxy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// For mechanisms and proxies, the partially observed variable they belong to.
    pub owner: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("directed cycle through {0}")]
    CycleDetected(String),
    #[error("mechanism {mechanism} has child {child}, which is not a mechanism or proxy")]
    MechanismHasForbiddenChild { mechanism: String, child: String },
    #[error("proxy {0} cannot take part in user edges or refers to a variable that is not partially observed")]
    DanglingProxy(String),
    #[error("duplicate node name {0}")]
    DuplicateName(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("self loop on {0}")]
    SelfLoop(String),
    #[error("invalid node name {0:?}")]
    InvalidName(String),
    #[error("mechanisms and proxies are synthesized; {0} cannot be declared")]
    ReservedName(String),
}

/// A validated missingness graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct MGraph {
    nodes: Vec<Node>,
    index: HashMap<String, NodeId>,
    directed: BTreeSet<(NodeId, NodeId)>,
    bidirected: BTreeSet<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    mechanism_children_allowed: bool,
}

/// Fluent construction of an [`MGraph`].
#[derive(Debug, Clone, Default)]
pub struct MGraphBuilder {
    nodes: Vec<(String, NodeKind)>,
    directed: Vec<(String, String)>,
    bidirected: Vec<(String, String)>,
    allow_mechanism_children: bool,
}

impl MGraphBuilder {
    pub fn node(mut self, name: &str, kind: NodeKind) -> Self {
        self.nodes.push((name.to_string(), kind));
        self
    }

    pub fn observed(self, name: &str) -> Self {
        self.node(name, NodeKind::FullyObserved)
    }

    pub fn partial(self, name: &str) -> Self {
        self.node(name, NodeKind::PartiallyObserved)
    }

    pub fn latent(self, name: &str) -> Self {
        self.node(name, NodeKind::Latent)
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.directed.push((from.to_string(), to.to_string()));
        self
    }

    pub fn biedge(mut self, a: &str, b: &str) -> Self {
        self.bidirected.push((a.to_string(), b.to_string()));
        self
    }

    /// Accept mechanisms with substantive children. Such graphs build, but
    /// classification and recovery refuse them.
    pub fn allow_mechanism_children(mut self, allow: bool) -> Self {
        self.allow_mechanism_children = allow;
        self
    }

    pub fn build(self) -> Result<MGraph, GraphError> {
        MGraph::from_parts(
            &self.nodes,
            &self.directed,
            &self.bidirected,
            self.allow_mechanism_children,
        )
    }
}

/// Builds and validates an m-graph from declared nodes and edges.
///
/// Only fully observed, partially observed and latent nodes may be declared;
/// `R_X` and `X*` are synthesized for every partially observed `X` and may be
/// referenced (the mechanism only) by edges.
pub fn build_mgraph(
    nodes: &[(&str, NodeKind)],
    directed: &[(&str, &str)],
    bidirected: &[(&str, &str)],
) -> Result<MGraph, GraphError> {
    let own = |v: &[(&str, &str)]| -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    };
    let nodes: Vec<(String, NodeKind)> = nodes.iter().map(|(n, k)| (n.to_string(), *k)).collect();
    MGraph::from_parts(&nodes, &own(directed), &own(bidirected), false)
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\'')
}

impl MGraph {
    pub fn builder() -> MGraphBuilder {
        MGraphBuilder::default()
    }

    pub fn empty() -> MGraph {
        MGraph {
            nodes: Vec::new(),
            index: HashMap::new(),
            directed: BTreeSet::new(),
            bidirected: BTreeSet::new(),
            parents: Vec::new(),
            children: Vec::new(),
            mechanism_children_allowed: false,
        }
    }

    fn from_parts(
        declared: &[(String, NodeKind)],
        directed: &[(String, String)],
        bidirected: &[(String, String)],
        allow_mechanism_children: bool,
    ) -> Result<MGraph, GraphError> {
        let mut g = MGraph::empty();
        g.mechanism_children_allowed = allow_mechanism_children;

        for (name, kind) in declared {
            if !valid_name(name) {
                return Err(GraphError::InvalidName(name.clone()));
            }
            if matches!(kind, NodeKind::Mechanism | NodeKind::Proxy) {
                return Err(GraphError::ReservedName(name.clone()));
            }
            if g.index.contains_key(name) {
                return Err(GraphError::DuplicateName(name.clone()));
            }
            g.push_node(name.clone(), *kind, None);
        }
        let partials: Vec<NodeId> = g
            .ids()
            .filter(|&id| g.kind(id) == NodeKind::PartiallyObserved)
            .collect();
        for x in partials {
            let var = g.name(x).to_string();
            for derived in [mechanism_name(&var), proxy_name(&var)] {
                if g.index.contains_key(&derived) {
                    return Err(GraphError::DuplicateName(derived));
                }
            }
            let r = g.push_node(mechanism_name(&var), NodeKind::Mechanism, Some(x));
            let p = g.push_node(proxy_name(&var), NodeKind::Proxy, Some(x));
            g.directed.insert((x, p));
            g.directed.insert((r, p));
        }

        for (a, b) in directed {
            let (ia, ib) = (g.lookup_user(a)?, g.lookup_user(b)?);
            if ia == ib {
                return Err(GraphError::SelfLoop(a.clone()));
            }
            if g.kind(ia) == NodeKind::Mechanism
                && g.kind(ib).is_substantive()
                && !allow_mechanism_children
            {
                return Err(GraphError::MechanismHasForbiddenChild {
                    mechanism: a.clone(),
                    child: b.clone(),
                });
            }
            g.directed.insert((ia, ib));
        }
        for (a, b) in bidirected {
            let (ia, ib) = (g.lookup_user(a)?, g.lookup_user(b)?);
            if ia == ib {
                return Err(GraphError::SelfLoop(a.clone()));
            }
            g.bidirected.insert((ia.min(ib), ia.max(ib)));
        }

        g.rebuild_adjacency();
        if let Some(node) = g.find_cycle() {
            return Err(GraphError::CycleDetected(g.name(node).to_string()));
        }
        Ok(g)
    }

    fn push_node(&mut self, name: String, kind: NodeKind, owner: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.index.insert(name.clone(), id);
        self.nodes.push(Node { name, kind, owner });
        id
    }

    fn lookup_user(&self, name: &str) -> Result<NodeId, GraphError> {
        match self.index.get(name) {
            Some(&id) if self.kind(id) == NodeKind::Proxy => {
                Err(GraphError::DanglingProxy(name.to_string()))
            }
            Some(&id) => Ok(id),
            None if name.ends_with(PROXY_SUFFIX) => {
                Err(GraphError::DanglingProxy(name.to_string()))
            }
            None => Err(GraphError::UnknownNode(name.to_string())),
        }
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.nodes.len();
        self.parents = vec![Vec::new(); n];
        self.children = vec![Vec::new(); n];
        for &(a, b) in &self.directed {
            self.parents[b.0].push(a);
            self.children[a.0].push(b);
        }
    }

    fn find_cycle(&self) -> Option<NodeId> {
        // Kahn; whatever is left over sits on or downstream of a cycle.
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for c in &self.children[v] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    queue.push(c.0);
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&i| indeg[i] > 0).map(NodeId)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn kind_of(&self, name: &str) -> Option<NodeKind> {
        self.id(name).map(|id| self.kind(id))
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.0]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    /// Nodes joined to `id` by a bidirected edge.
    pub fn spouses(&self, id: NodeId) -> Vec<NodeId> {
        self.bidirected
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.directed.iter().copied()
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.bidirected.iter().copied()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.directed.contains(&(from, to))
    }

    pub fn has_biedge(&self, a: NodeId, b: NodeId) -> bool {
        self.bidirected.contains(&(a.min(b), a.max(b)))
    }

    /// Joined by any edge, directed either way or bidirected.
    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a) || self.has_biedge(a, b)
    }

    pub fn mechanism_children_allowed(&self) -> bool {
        self.mechanism_children_allowed
    }

    fn names_of_kind(&self, kind: NodeKind) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.name.clone())
            .collect()
    }

    /// `V_o`, in declaration order.
    pub fn observed(&self) -> Vec<String> {
        self.names_of_kind(NodeKind::FullyObserved)
    }

    /// `V_m`, in declaration order.
    pub fn partial(&self) -> Vec<String> {
        self.names_of_kind(NodeKind::PartiallyObserved)
    }

    pub fn latents(&self) -> Vec<String> {
        self.names_of_kind(NodeKind::Latent)
    }

    pub fn mechanisms(&self) -> Vec<String> {
        self.names_of_kind(NodeKind::Mechanism)
    }

    pub fn proxies(&self) -> Vec<String> {
        self.names_of_kind(NodeKind::Proxy)
    }

    pub fn is_partial(&self, name: &str) -> bool {
        self.kind_of(name) == Some(NodeKind::PartiallyObserved)
    }

    pub fn is_observed(&self, name: &str) -> bool {
        self.kind_of(name) == Some(NodeKind::FullyObserved)
    }

    pub fn is_mechanism(&self, name: &str) -> bool {
        self.kind_of(name) == Some(NodeKind::Mechanism)
    }

    /// `R_X` for a partially observed `X`.
    pub fn mechanism_of(&self, var: &str) -> Option<String> {
        self.is_partial(var).then(|| mechanism_name(var))
    }

    /// `X*` for a partially observed `X`.
    pub fn proxy_of(&self, var: &str) -> Option<String> {
        self.is_partial(var).then(|| proxy_name(var))
    }

    /// The partially observed variable a mechanism or proxy belongs to.
    pub fn owner_of(&self, name: &str) -> Option<String> {
        let id = self.id(name)?;
        self.node(id).owner.map(|o| self.name(o).to_string())
    }

    /// Mechanism edges into substantive nodes, i.e. the violations of the
    /// standard m-graph assumption.
    pub fn mechanism_child_violations(&self) -> Vec<(String, String)> {
        self.directed
            .iter()
            .filter(|(a, b)| self.kind(*a) == NodeKind::Mechanism && self.kind(*b).is_substantive())
            .map(|&(a, b)| (self.name(a).to_string(), self.name(b).to_string()))
            .collect()
    }

    pub fn is_standard(&self) -> bool {
        self.mechanism_child_violations().is_empty()
    }

    /// Node ids in a topological order (parents before children), ties broken
    /// by declaration order.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            out.push(NodeId(v));
            for c in &self.children[v] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.insert(c.0);
                }
            }
        }
        out
    }

    pub fn ancestors_of(&self, seeds: &[NodeId]) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = seeds.iter().copied().collect();
        let mut stack: Vec<NodeId> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            for &p in self.parents(v) {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    pub fn descendants_of(&self, seeds: &[NodeId]) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = seeds.iter().copied().collect();
        let mut stack: Vec<NodeId> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            for &c in self.children(v) {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Declared (non-synthesized) nodes in order.
    pub(crate) fn declared(&self) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .filter(|n| !matches!(n.kind, NodeKind::Mechanism | NodeKind::Proxy))
    }

    /// Directed edges as given by the user, i.e. without the masking edges.
    pub(crate) fn user_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.directed
            .iter()
            .copied()
            .filter(|&(_, b)| self.kind(b) != NodeKind::Proxy)
    }

    /// A copy with selected directed and bidirected edges dropped. Used for
    /// mutilated graphs; the node set never changes.
    pub(crate) fn without_edges(
        &self,
        drop_directed: impl Fn(NodeId, NodeId) -> bool,
        drop_bidirected: impl Fn(NodeId, NodeId) -> bool,
    ) -> MGraph {
        let mut g = self.clone();
        g.directed.retain(|&(a, b)| !drop_directed(a, b));
        g.bidirected.retain(|&(a, b)| !drop_bidirected(a, b));
        g.rebuild_adjacency();
        g
    }

    fn signature(
        &self,
    ) -> (
        BTreeMap<&str, NodeKind>,
        BTreeSet<(&str, &str)>,
        BTreeSet<(&str, &str)>,
    ) {
        let nodes = self
            .nodes
            .iter()
            .map(|n| (n.name.as_str(), n.kind))
            .collect();
        let directed = self
            .directed
            .iter()
            .map(|&(a, b)| (self.name(a), self.name(b)))
            .collect();
        let bidirected = self
            .bidirected
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (self.name(a), self.name(b));
                (x.min(y), x.max(y))
            })
            .collect();
        (nodes, directed, bidirected)
    }
}

/// Structural equality up to node ordering.
impl PartialEq for MGraph {
    fn eq(&self, other: &Self) -> bool {
        self.mechanism_children_allowed == other.mechanism_children_allowed
            && self.signature() == other.signature()
    }
}

impl Eq for MGraph {}

impl fmt::Display for MGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_mgraph(self))
    }
}

/// Replaces every bidirected edge `A <-> B` by a fresh latent `U_A_B` with
/// `U_A_B -> A` and `U_A_B -> B`.
pub fn expand_latents(g: &MGraph) -> MGraph {
    if g.bidirected.is_empty() {
        return g.clone();
    }
    let mut out = g.clone();
    out.bidirected.clear();
    for &(a, b) in &g.bidirected {
        let base = format!("U_{}_{}", g.name(a), g.name(b));
        let mut name = base.clone();
        let mut k = 1;
        while out.index.contains_key(&name) {
            k += 1;
            name = format!("{base}_{k}");
        }
        let u = out.push_node(name, NodeKind::Latent, None);
        out.directed.insert((u, a));
        out.directed.insert((u, b));
    }
    out.rebuild_adjacency();
    out
}

/// The deterministic masking function relating a variable, its mechanism and
/// its proxy: the proxy copies the value when the mechanism is 0 and is the
/// missing marker otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskingRule;

impl MaskingRule {
    pub fn apply<'a>(&self, value: &'a str, mechanism: u8) -> &'a str {
        if mechanism == 0 {
            value
        } else {
            MISSING
        }
    }

    /// Index form used by the simulator: proxies share their variable's value
    /// indices and use one extra index, `domain_len`, for the marker.
    pub fn apply_index(&self, value: usize, mechanism: usize, domain_len: usize) -> usize {
        if mechanism == 0 {
            value
        } else {
            domain_len
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obesity_mar() -> MGraph {
        MGraph::builder()
            .observed("A")
            .observed("G")
            .partial("O")
            .edge("A", "O")
            .edge("G", "O")
            .edge("A", "R_O")
            .build()
            .unwrap()
    }

    #[test]
    fn synthesizes_mechanism_and_proxy() {
        let g = obesity_mar();
        assert_eq!(g.kind_of("R_O"), Some(NodeKind::Mechanism));
        assert_eq!(g.kind_of("O*"), Some(NodeKind::Proxy));
        let proxy = g.id("O*").unwrap();
        let mut parents: Vec<&str> = g.parents(proxy).iter().map(|&p| g.name(p)).collect();
        parents.sort();
        assert_eq!(parents, vec!["O", "R_O"]);
        assert!(g.children(proxy).is_empty());
        assert_eq!(g.owner_of("R_O").as_deref(), Some("O"));
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn empty_graph() {
        let g = build_mgraph(&[], &[], &[]).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn rejects_cycle() {
        let err = MGraph::builder()
            .observed("X")
            .observed("Y")
            .edge("X", "Y")
            .edge("Y", "X")
            .build()
            .unwrap_err();
        assert!(matches!(err, GraphError::CycleDetected(_)));
    }

    #[test]
    fn rejects_mechanism_children_unless_allowed() {
        let b = MGraph::builder()
            .observed("A")
            .partial("O")
            .edge("R_O", "A");
        assert!(matches!(
            b.clone().build(),
            Err(GraphError::MechanismHasForbiddenChild { .. })
        ));
        let g = b.allow_mechanism_children(true).build().unwrap();
        assert!(!g.is_standard());
    }

    #[test]
    fn mechanism_to_mechanism_is_fine() {
        let g = MGraph::builder()
            .partial("X")
            .partial("Y")
            .edge("R_X", "R_Y")
            .build()
            .unwrap();
        assert!(g.is_standard());
    }

    #[test]
    fn proxies_are_off_limits() {
        let err = MGraph::builder()
            .partial("X")
            .observed("Y")
            .edge("X*", "Y")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::DanglingProxy("X*".into()));
        let err = MGraph::builder()
            .observed("X")
            .observed("Y")
            .biedge("X*", "Y")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::DanglingProxy("X*".into()));
    }

    #[test]
    fn duplicate_and_colliding_names() {
        let err = MGraph::builder()
            .observed("A")
            .partial("A")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::DuplicateName("A".into()));
        let err = MGraph::builder()
            .observed("R_X")
            .partial("X")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::DuplicateName("R_X".into()));
    }

    #[test]
    fn mechanism_of_observed_is_unknown() {
        let err = MGraph::builder()
            .observed("A")
            .edge("A", "R_A")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::UnknownNode("R_A".into()));
    }

    #[test]
    fn expand_latents_adds_one_latent_per_biedge() {
        let g = MGraph::builder()
            .observed("S")
            .partial("O")
            .observed("W")
            .biedge("S", "O")
            .biedge("O", "W")
            .build()
            .unwrap();
        let e = expand_latents(&g);
        assert_eq!(e.bidirected_edges().count(), 0);
        assert_eq!(e.len(), g.len() + 2);
        let latents = e.latents();
        assert_eq!(latents.len(), 2);
        assert_ne!(latents[0], latents[1]);
        for l in &latents {
            assert_eq!(e.children(e.id(l).unwrap()).len(), 2);
        }
    }

    #[test]
    fn expand_latents_identity_without_biedges() {
        let g = obesity_mar();
        assert_eq!(expand_latents(&g), g);
    }

    #[test]
    fn masking_rule() {
        assert_eq!(MaskingRule.apply("Obese", 0), "Obese");
        assert_eq!(MaskingRule.apply("Obese", 1), MISSING);
        assert_eq!(MaskingRule.apply_index(1, 1, 2), 2);
    }
}
