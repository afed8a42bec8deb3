//! d-separation, minimal separators and Markov blankets.
//!
//! Every query runs on the latent-expanded graph, so bidirected edges behave
//! like the unobserved common parents they stand for. Two independent
//! deciders are provided: a reachability ("Bayes-ball") walk, used everywhere,
//! and the classical moralized-ancestral-graph test, kept as a cross-check.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{expand_latents, MGraph, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DsepError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} appears in more than one of x, y, z")]
    OverlappingSets(String),
}

/// `x ⊥ y | z`, by node name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SepQuery {
    pub x: BTreeSet<String>,
    pub y: BTreeSet<String>,
    pub z: BTreeSet<String>,
}

fn to_set<I, S>(it: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    it.into_iter().map(|s| s.as_ref().to_string()).collect()
}

impl SepQuery {
    pub fn new<I1, I2, I3, S1, S2, S3>(x: I1, y: I2, z: I3) -> Self
    where
        I1: IntoIterator<Item = S1>,
        I2: IntoIterator<Item = S2>,
        I3: IntoIterator<Item = S3>,
        S1: AsRef<str>,
        S2: AsRef<str>,
        S3: AsRef<str>,
    {
        SepQuery {
            x: to_set(x),
            y: to_set(y),
            z: to_set(z),
        }
    }

    pub fn swapped(&self) -> SepQuery {
        SepQuery {
            x: self.y.clone(),
            y: self.x.clone(),
            z: self.z.clone(),
        }
    }
}

impl std::fmt::Display for SepQuery {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        if self.z.is_empty() {
            write!(f, "{{{}}} ⊥ {{{}}}", join(&self.x), join(&self.y))
        } else {
            write!(
                f,
                "{{{}}} ⊥ {{{}}} | {{{}}}",
                join(&self.x),
                join(&self.y),
                join(&self.z)
            )
        }
    }
}

/// Options for separator searches and blankets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SepOptions {
    /// Let proxy nodes enter candidate pools and blankets.
    pub include_proxies: bool,
}

/// A d-separation oracle over one (latent-expanded) graph.
#[derive(Debug, Clone)]
pub struct DsepEngine {
    g: MGraph,
}

impl DsepEngine {
    pub fn new(g: &MGraph) -> Self {
        DsepEngine {
            g: expand_latents(g),
        }
    }

    /// The expanded graph the engine reasons over.
    pub fn graph(&self) -> &MGraph {
        &self.g
    }

    /// Engine over the mutilated graph with edges into `overline` and edges
    /// out of `underline` removed.
    pub fn mutilated(
        &self,
        overline: &BTreeSet<String>,
        underline: &BTreeSet<String>,
    ) -> DsepEngine {
        let over: BTreeSet<NodeId> = overline.iter().filter_map(|n| self.g.id(n)).collect();
        let under: BTreeSet<NodeId> = underline.iter().filter_map(|n| self.g.id(n)).collect();
        DsepEngine {
            g: self
                .g
                .without_edges(|a, b| over.contains(&b) || under.contains(&a), |_, _| false),
        }
    }

    fn ids(&self, names: &BTreeSet<String>) -> Result<Vec<NodeId>, DsepError> {
        names
            .iter()
            .map(|n| {
                self.g
                    .id(n)
                    .ok_or_else(|| DsepError::UnknownNode(n.clone()))
            })
            .collect()
    }

    fn check(&self, q: &SepQuery) -> Result<(Vec<NodeId>, Vec<NodeId>, Vec<NodeId>), DsepError> {
        let (x, y, z) = (self.ids(&q.x)?, self.ids(&q.y)?, self.ids(&q.z)?);
        for n in q.x.iter().chain(&q.y) {
            if q.z.contains(n) {
                return Err(DsepError::OverlappingSets(n.clone()));
            }
        }
        if let Some(n) = q.x.intersection(&q.y).next() {
            return Err(DsepError::OverlappingSets(n.clone()));
        }
        Ok((x, y, z))
    }

    pub fn separated(&self, q: &SepQuery) -> Result<bool, DsepError> {
        let (x, y, z) = self.check(q)?;
        if x.is_empty() || y.is_empty() {
            return Ok(true);
        }
        let reach = self.reachable(&x, &z);
        Ok(!y.iter().any(|v| reach[v.index()]))
    }

    /// Convenience wrapper over name slices.
    pub fn separated_names(&self, x: &[&str], y: &[&str], z: &[&str]) -> Result<bool, DsepError> {
        self.separated(&SepQuery::new(x, y, z))
    }

    /// Nodes reachable from `sources` by an active trail given `given`.
    fn reachable(&self, sources: &[NodeId], given: &[NodeId]) -> Vec<bool> {
        let n = self.g.len();
        let mut observed = vec![false; n];
        for v in given {
            observed[v.index()] = true;
        }
        // Ancestors of the conditioning set, where colliders are open.
        let mut anc = vec![false; n];
        for v in self.g.ancestors_of(given) {
            anc[v.index()] = true;
        }
        const UP: usize = 0; // arrived from a child
        const DOWN: usize = 1; // arrived from a parent
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut queue: VecDeque<(NodeId, usize)> = sources.iter().map(|&s| (s, UP)).collect();
        while let Some((v, dir)) = queue.pop_front() {
            let i = v.index();
            if visited[i][dir] {
                continue;
            }
            visited[i][dir] = true;
            if !observed[i] {
                reach[i] = true;
            }
            if dir == UP && !observed[i] {
                queue.extend(self.g.parents(v).iter().map(|&p| (p, UP)));
                queue.extend(self.g.children(v).iter().map(|&c| (c, DOWN)));
            } else if dir == DOWN {
                if !observed[i] {
                    queue.extend(self.g.children(v).iter().map(|&c| (c, DOWN)));
                }
                if anc[i] {
                    queue.extend(self.g.parents(v).iter().map(|&p| (p, UP)));
                }
            }
        }
        for s in sources {
            reach[s.index()] = false;
        }
        reach
    }

    /// Moralization route: separated iff `z` cuts `x` from `y` in the moral
    /// graph of the ancestral set of `x ∪ y ∪ z`.
    pub fn separated_moral(&self, q: &SepQuery) -> Result<bool, DsepError> {
        let (x, y, z) = self.check(q)?;
        if x.is_empty() || y.is_empty() {
            return Ok(true);
        }
        let seeds: Vec<NodeId> = x.iter().chain(&y).chain(&z).copied().collect();
        let anc = self.g.ancestors_of(&seeds);
        let n = self.g.len();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &v in &anc {
            let ps: Vec<NodeId> = self.g.parents(v).to_vec();
            for (i, &p) in ps.iter().enumerate() {
                adj[p.index()].insert(v.index());
                adj[v.index()].insert(p.index());
                for &p2 in &ps[i + 1..] {
                    adj[p.index()].insert(p2.index());
                    adj[p2.index()].insert(p.index());
                }
            }
        }
        let blocked: BTreeSet<usize> = z.iter().map(|v| v.index()).collect();
        let targets: BTreeSet<usize> = y.iter().map(|v| v.index()).collect();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = x.iter().map(|v| v.index()).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(v) = stack.pop() {
            if targets.contains(&v) {
                return Ok(false);
            }
            for &w in &adj[v] {
                if !seen[w] && !blocked.contains(&w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        Ok(true)
    }

    /// Smallest `Z ⊇ must_include`, disjoint from `forbidden`, that separates
    /// `x` from `y`; among equally small candidates the lexicographically
    /// first. `None` when no admissible separator exists.
    pub fn minimal_separator(
        &self,
        x: &BTreeSet<String>,
        y: &BTreeSet<String>,
        must_include: &BTreeSet<String>,
        forbidden: &BTreeSet<String>,
        opts: SepOptions,
    ) -> Result<Option<BTreeSet<String>>, DsepError> {
        if let Some(n) = must_include.intersection(forbidden).next() {
            return Err(DsepError::OverlappingSets(n.clone()));
        }
        let seeds: Vec<NodeId> = self
            .ids(x)?
            .into_iter()
            .chain(self.ids(y)?)
            .chain(self.ids(must_include)?)
            .collect();
        let pool: Vec<String> = self
            .g
            .ancestors_of(&seeds)
            .into_iter()
            .filter(|&v| match self.g.kind(v) {
                NodeKind::Latent => false,
                NodeKind::Proxy => opts.include_proxies,
                _ => true,
            })
            .map(|v| self.g.name(v).to_string())
            .filter(|n| {
                !x.contains(n)
                    && !y.contains(n)
                    && !forbidden.contains(n)
                    && !must_include.contains(n)
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let separates = |extra: &[&String]| -> Result<bool, DsepError> {
            let mut z = must_include.clone();
            z.extend(extra.iter().map(|s| (*s).clone()));
            self.separated(&SepQuery {
                x: x.clone(),
                y: y.clone(),
                z,
            })
        };

        // The restricted ancestral set separates iff any admissible set does.
        let all: Vec<&String> = pool.iter().collect();
        if !separates(&all)? {
            return Ok(None);
        }
        if pool.len() <= 16 {
            for size in 0..=pool.len() {
                let mut found = None;
                for_each_combination(pool.len(), size, |idx| {
                    if found.is_some() {
                        return;
                    }
                    let pick: Vec<&String> = idx.iter().map(|&i| &pool[i]).collect();
                    if let Ok(true) = separates(&pick) {
                        found = Some(pick.into_iter().cloned().collect::<BTreeSet<_>>());
                    }
                });
                if let Some(extra) = found {
                    let mut z = must_include.clone();
                    z.extend(extra);
                    return Ok(Some(z));
                }
            }
            unreachable!("the full pool separates");
        }
        // Large pools: greedy pruning, which still yields a set from which no
        // single node can be dropped.
        let mut current: Vec<&String> = all;
        let mut i = current.len();
        while i > 0 {
            i -= 1;
            let mut trial = current.clone();
            trial.remove(i);
            if separates(&trial)? {
                current = trial;
            }
        }
        let mut z = must_include.clone();
        z.extend(current.into_iter().cloned());
        Ok(Some(z))
    }

    /// Parents, children and co-parents of `v`. Proxies are left out unless
    /// requested.
    pub fn markov_blanket(&self, v: &str, opts: SepOptions) -> Result<BTreeSet<String>, DsepError> {
        let id = self
            .g
            .id(v)
            .ok_or_else(|| DsepError::UnknownNode(v.to_string()))?;
        let keep = |w: NodeId| opts.include_proxies || self.g.kind(w) != NodeKind::Proxy;
        let mut out = BTreeSet::new();
        for &p in self.g.parents(id) {
            out.insert(p);
        }
        for &c in self.g.children(id) {
            if !keep(c) {
                continue;
            }
            out.insert(c);
            for &p in self.g.parents(c) {
                out.insert(p);
            }
        }
        out.remove(&id);
        Ok(out
            .into_iter()
            .filter(|&w| keep(w))
            .map(|w| self.g.name(w).to_string())
            .collect())
    }
}

/// Calls `f` with every `k`-subset of `0..n`, as sorted index vectors in
/// lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All subsets of `items`, smallest first, lexicographic within a size.
pub(crate) fn subsets_by_size<T: Clone>(items: &[T], max_size: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    for k in 0..=max_size.min(items.len()) {
        for_each_combination(items.len(), k, |idx| {
            out.push(idx.iter().map(|&i| items[i].clone()).collect());
        });
    }
    out
}

pub fn d_separated(g: &MGraph, q: &SepQuery) -> Result<bool, DsepError> {
    DsepEngine::new(g).separated(q)
}

pub fn find_minimal_separator(
    g: &MGraph,
    x: &BTreeSet<String>,
    y: &BTreeSet<String>,
    must_include: &BTreeSet<String>,
    forbidden: &BTreeSet<String>,
) -> Result<Option<BTreeSet<String>>, DsepError> {
    DsepEngine::new(g).minimal_separator(x, y, must_include, forbidden, SepOptions::default())
}

pub fn markov_blanket(g: &MGraph, v: &str) -> Result<BTreeSet<String>, DsepError> {
    DsepEngine::new(g).markov_blanket(v, SepOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MGraph;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

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
    fn obesity_mar_reads() {
        let g = obesity_mar();
        assert!(d_separated(&g, &SepQuery::new(["O"], ["R_O"], ["A"])).unwrap());
        assert!(!d_separated(&g, &SepQuery::new(["G"], ["R_O"], ["O"])).unwrap());
        assert!(d_separated(&g, &SepQuery::new(["G"], ["A"], [] as [&str; 0])).unwrap());
    }

    #[test]
    fn edgeless_graph_is_all_separated() {
        let g = MGraph::builder()
            .observed("A")
            .observed("B")
            .observed("C")
            .build()
            .unwrap();
        assert!(d_separated(&g, &SepQuery::new(["A"], ["B"], [] as [&str; 0])).unwrap());
        assert!(d_separated(&g, &SepQuery::new(["A"], ["B"], ["C"])).unwrap());
    }

    #[test]
    fn unknown_and_overlapping() {
        let g = obesity_mar();
        assert_eq!(
            d_separated(&g, &SepQuery::new(["Q"], ["A"], [] as [&str; 0])),
            Err(DsepError::UnknownNode("Q".into()))
        );
        assert!(matches!(
            d_separated(&g, &SepQuery::new(["A"], ["O"], ["A"])),
            Err(DsepError::OverlappingSets(_))
        ));
    }

    #[test]
    fn bidirected_edges_connect() {
        let g = MGraph::builder()
            .observed("X")
            .observed("Y")
            .observed("Z")
            .biedge("X", "Y")
            .edge("Y", "Z")
            .build()
            .unwrap();
        let e = DsepEngine::new(&g);
        assert!(!e.separated_names(&["X"], &["Z"], &[]).unwrap());
        assert!(e.separated_names(&["X"], &["Z"], &["Y"]).unwrap());
    }

    #[test]
    fn minimal_separator_examples() {
        let g = obesity_mar();
        assert_eq!(
            find_minimal_separator(&g, &set(&["O"]), &set(&["R_O"]), &set(&[]), &set(&[])).unwrap(),
            Some(set(&["A"]))
        );
        assert_eq!(
            find_minimal_separator(&g, &set(&["O"]), &set(&["R_O"]), &set(&[]), &set(&["A"]))
                .unwrap(),
            None
        );
        assert_eq!(
            find_minimal_separator(&g, &set(&["A"]), &set(&["O"]), &set(&[]), &set(&[])).unwrap(),
            None
        );
    }

    #[test]
    fn forbidden_with_exhaustive_check() {
        // Exhaustive oracle for the O/R_O pair with A forbidden: the only other
        // candidates are G and O*, and no subset of them separates.
        let g = obesity_mar();
        let e = DsepEngine::new(&g);
        for z in [vec![], vec!["G"], vec!["O*"], vec!["G", "O*"]] {
            assert!(!e.separated_names(&["O"], &["R_O"], &z).unwrap());
        }
    }

    #[test]
    fn markov_blanket_examples() {
        let g = MGraph::builder()
            .partial("X")
            .partial("Y")
            .edge("X", "Y")
            .edge("X", "R_Y")
            .edge("Y", "R_X")
            .build()
            .unwrap();
        assert_eq!(markov_blanket(&g, "R_X").unwrap(), set(&["Y"]));
        let chain = MGraph::builder()
            .observed("A")
            .observed("B")
            .observed("C")
            .edge("A", "B")
            .edge("B", "C")
            .build()
            .unwrap();
        assert_eq!(markov_blanket(&chain, "B").unwrap(), set(&["A", "C"]));
        let iso = MGraph::builder()
            .observed("A")
            .observed("B")
            .build()
            .unwrap();
        assert!(markov_blanket(&iso, "A").unwrap().is_empty());
    }

    #[test]
    fn combinations_in_lex_order() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        let mut n = 0;
        for_each_combination(3, 0, |_| n += 1);
        assert_eq!(n, 1);
        assert_eq!(subsets_by_size(&[1, 2, 3], 3).len(), 8);
    }
}
