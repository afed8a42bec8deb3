//! Discrete models over m-graphs: random parameterization, exact
//! enumeration, sampling and intervention.

mod file;

pub use file::{parse_model, serialize_model};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    observed_columns, Column, Dataset, Domains, ObservedDistribution, Source, Table, MISSING_CODE,
};
use crate::graph::{expand_latents, MGraph, MaskingRule, NodeKind, SyntaxError, MISSING};

pub const DEFAULT_FLOOR: f64 = 0.05;

/// Largest number of configurations enumeration will visit.
pub const STATE_BUDGET: u128 = 10_000_000;

/// Rows drawn from one RNG stream.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("positivity floor {floor} needs to be below 1/{max_domain}")]
    FloorTooLarge { floor: f64, max_domain: usize },
    #[error("positivity floor {0} needs to be positive")]
    InvalidFloor(f64),
    #[error("{states} configurations exceed the enumeration budget")]
    StateSpaceTooLarge { states: u128 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{value} is not in the domain of {node}")]
    UnknownValue { node: String, value: String },
    #[error("node {0} has no conditional table")]
    MissingCpt(String),
    #[error("table for {node}: {detail}")]
    BadCpt { node: String, detail: String },
    #[error("domain of {node}: {detail}")]
    BadDomain { node: String, detail: String },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
}

/// `P(node | parents)`: one row per parent configuration (row-major, last
/// parent fastest), each row a distribution over the node's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: String,
    pub parents: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Slot {
    k: usize,
    /// Positions of the parents in the slot order, as listed in the table.
    parents: Vec<usize>,
    probs: Vec<f64>,
}

/// A graph whose non-proxy nodes (latents of bidirected edges included)
/// carry finite domains and conditional tables.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    graph: MGraph,
    expanded: MGraph,
    domains: Domains,
    cpts: BTreeMap<String, Cpt>,
    order: Vec<String>,
    slots: Vec<Slot>,
}

fn binary() -> Vec<String> {
    vec!["0".to_string(), "1".to_string()]
}

/// Non-proxy nodes of the expanded graph, parents first.
fn core_order(expanded: &MGraph) -> Vec<String> {
    expanded
        .topological_order()
        .into_iter()
        .filter(|&id| expanded.kind(id) != NodeKind::Proxy)
        .map(|id| expanded.name(id).to_string())
        .collect()
}

fn resolve_domains(
    expanded: &MGraph,
    order: &[String],
    domains: &Domains,
) -> Result<Domains, SimulationError> {
    let mut out = Domains::new();
    for name in order {
        let kind = expanded.kind_of(name).unwrap();
        let d = match domains.get(name) {
            Some(d) => d.clone(),
            None => binary(),
        };
        if kind == NodeKind::Mechanism && d != binary() {
            return Err(SimulationError::BadDomain {
                node: name.clone(),
                detail: "mechanisms take values 0 and 1".into(),
            });
        }
        if d.is_empty() {
            return Err(SimulationError::BadDomain {
                node: name.clone(),
                detail: "empty".into(),
            });
        }
        if d.iter().any(|v| v == MISSING) {
            return Err(SimulationError::BadDomain {
                node: name.clone(),
                detail: format!("{MISSING} is reserved"),
            });
        }
        if d.iter().collect::<BTreeSet<_>>().len() != d.len() {
            return Err(SimulationError::BadDomain {
                node: name.clone(),
                detail: "repeated value".into(),
            });
        }
        out.insert(name.clone(), d);
    }
    for name in domains.keys() {
        if !out.contains_key(name) {
            return Err(SimulationError::UnknownNode(name.clone()));
        }
    }
    Ok(out)
}

impl DiscreteModel {
    /// Checks and assembles a model. `domains` may omit nodes (binary
    /// `0`/`1`); every non-proxy node of the latent-expanded graph needs a
    /// table whose parents are exactly its graph parents.
    pub fn new(
        g: &MGraph,
        domains: &Domains,
        cpts: Vec<Cpt>,
    ) -> Result<DiscreteModel, SimulationError> {
        let expanded = expand_latents(g);
        let order = core_order(&expanded);
        let domains = resolve_domains(&expanded, &order, domains)?;
        let mut map = BTreeMap::new();
        for c in cpts {
            if !domains.contains_key(&c.node) {
                return Err(SimulationError::UnknownNode(c.node.clone()));
            }
            let id = expanded.id(&c.node).unwrap();
            let want: BTreeSet<&str> = expanded
                .parents(id)
                .iter()
                .map(|&p| expanded.name(p))
                .collect();
            let got: BTreeSet<&str> = c.parents.iter().map(String::as_str).collect();
            if want != got || got.len() != c.parents.len() {
                return Err(SimulationError::BadCpt {
                    node: c.node.clone(),
                    detail: format!("parents {:?} differ from the graph's {:?}", c.parents, want),
                });
            }
            if map.insert(c.node.clone(), c.clone()).is_some() {
                return Err(SimulationError::BadCpt {
                    node: c.node,
                    detail: "given twice".into(),
                });
            }
        }
        Self::assemble(g.clone(), expanded, domains, map, order)
    }

    fn assemble(
        graph: MGraph,
        expanded: MGraph,
        domains: Domains,
        cpts: BTreeMap<String, Cpt>,
        order: Vec<String>,
    ) -> Result<DiscreteModel, SimulationError> {
        let pos: HashMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut slots = Vec::with_capacity(order.len());
        for name in &order {
            let c = cpts
                .get(name)
                .ok_or_else(|| SimulationError::MissingCpt(name.clone()))?;
            let k = domains[name].len();
            let rows: usize = c.parents.iter().map(|p| domains[p].len()).product();
            let bad = |detail: String| SimulationError::BadCpt {
                node: name.clone(),
                detail,
            };
            if c.probs.len() != rows * k {
                return Err(bad(format!(
                    "expected {} entries, found {}",
                    rows * k,
                    c.probs.len()
                )));
            }
            if let Some(p) = c.probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(bad(format!("entry {p} is not a probability")));
            }
            for (r, row) in c.probs.chunks(k).enumerate() {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(bad(format!("row {} sums to {s}", r + 1)));
                }
            }
            slots.push(Slot {
                k,
                parents: c.parents.iter().map(|p| pos[p.as_str()]).collect(),
                probs: c.probs.clone(),
            });
        }
        Ok(DiscreteModel {
            graph,
            expanded,
            domains,
            cpts,
            order,
            slots,
        })
    }

    pub fn graph(&self) -> &MGraph {
        &self.graph
    }

    /// The graph with bidirected edges replaced by explicit latents.
    pub fn expanded(&self) -> &MGraph {
        &self.expanded
    }

    pub fn domain(&self, node: &str) -> Option<&[String]> {
        self.domains.get(node).map(Vec::as_slice)
    }

    pub fn domains(&self) -> &Domains {
        &self.domains
    }

    pub fn cpt(&self, node: &str) -> Option<&Cpt> {
        self.cpts.get(node)
    }

    /// Tables in sampling order.
    pub fn cpts(&self) -> impl Iterator<Item = &Cpt> + '_ {
        self.order.iter().map(|n| &self.cpts[n])
    }

    fn row_of(&self, slot: &Slot, vals: &[usize]) -> usize {
        slot.parents
            .iter()
            .fold(0, |r, &p| r * self.slots[p].k + vals[p])
    }

    fn states(&self) -> u128 {
        self.slots
            .iter()
            .fold(1u128, |a, s| a.saturating_mul(s.k as u128))
    }

    /// Calls `f` with every configuration of positive probability.
    fn walk(&self, f: &mut impl FnMut(&[usize], f64)) -> Result<(), SimulationError> {
        let states = self.states();
        if states > STATE_BUDGET {
            return Err(SimulationError::StateSpaceTooLarge { states });
        }
        let mut vals = vec![0usize; self.slots.len()];
        self.descend(0, 1.0, &mut vals, f);
        Ok(())
    }

    fn descend(
        &self,
        depth: usize,
        p: f64,
        vals: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], f64),
    ) {
        if depth == self.slots.len() {
            f(vals, p);
            return;
        }
        let slot = &self.slots[depth];
        let base = self.row_of(slot, vals) * slot.k;
        for v in 0..slot.k {
            let q = slot.probs[base + v];
            if q == 0.0 {
                continue;
            }
            vals[depth] = v;
            self.descend(depth + 1, p * q, vals, f);
        }
    }

    fn slot_of(&self, name: &str) -> usize {
        self.order.iter().position(|n| n == name).unwrap()
    }

    /// Exact distribution over observed and partially observed variables
    /// and mechanisms, in graph order. Latents are summed out.
    pub fn enumerate_joint(&self) -> Result<Table, SimulationError> {
        let cols: Vec<String> = self
            .graph
            .nodes()
            .iter()
            .filter(|n| {
                matches!(
                    n.kind,
                    NodeKind::FullyObserved | NodeKind::PartiallyObserved | NodeKind::Mechanism
                )
            })
            .map(|n| n.name.clone())
            .collect();
        let slots: Vec<usize> = cols.iter().map(|c| self.slot_of(c)).collect();
        let doms: Vec<Vec<String>> = cols.iter().map(|c| self.domains[c].clone()).collect();
        let sizes: Vec<usize> = doms.iter().map(Vec::len).collect();
        let mut out = Table::zeros(cols, doms);
        let probs = out.probs_mut();
        self.walk(&mut |vals, p| {
            let idx = slots
                .iter()
                .zip(&sizes)
                .fold(0, |i, (&s, &k)| i * k + vals[s]);
            probs[idx] += p;
        })?;
        Ok(out)
    }

    /// Exact observed-data distribution over the columns of
    /// [`observed_columns`], proxies masked.
    pub fn enumerate_observed(&self) -> Result<ObservedDistribution, SimulationError> {
        enum Read {
            Value(usize),
            Proxy {
                var: usize,
                mechanism: usize,
                k: usize,
            },
        }
        let cols = observed_columns(&self.graph);
        let mut doms = Vec::new();
        let mut reads = Vec::new();
        for c in &cols {
            match self.graph.kind_of(c).unwrap() {
                NodeKind::Proxy => {
                    let owner = self.graph.owner_of(c).unwrap();
                    let mut d = self.domains[&owner].clone();
                    reads.push(Read::Proxy {
                        var: self.slot_of(&owner),
                        mechanism: self.slot_of(&self.graph.mechanism_of(&owner).unwrap()),
                        k: d.len(),
                    });
                    d.push(MISSING.to_string());
                    doms.push(d);
                }
                _ => {
                    reads.push(Read::Value(self.slot_of(c)));
                    doms.push(self.domains[c].clone());
                }
            }
        }
        let sizes: Vec<usize> = doms.iter().map(Vec::len).collect();
        let mut out = Table::zeros(cols, doms);
        let probs = out.probs_mut();
        self.walk(&mut |vals, p| {
            let idx = reads.iter().zip(&sizes).fold(0, |i, (r, &k)| {
                let v = match *r {
                    Read::Value(s) => vals[s],
                    Read::Proxy { var, mechanism, k } => {
                        MaskingRule.apply_index(vals[var], vals[mechanism], k)
                    }
                };
                i * k + v
            });
            probs[idx] += p;
        })?;
        Ok(ObservedDistribution {
            table: out,
            source: Source::Exact,
        })
    }

    /// `n` i.i.d. rows with one column per observed or partially observed
    /// variable; masked entries are missing. Rows are drawn in blocks, each
    /// from its own stream of a ChaCha8 generator seeded with `seed`, so the
    /// result does not depend on the thread count.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, SimulationError> {
        if n == 0 {
            return Err(SimulationError::EmptySample);
        }
        let vars: Vec<String> = self
            .graph
            .nodes()
            .iter()
            .filter(|n| {
                matches!(
                    n.kind,
                    NodeKind::FullyObserved | NodeKind::PartiallyObserved
                )
            })
            .map(|n| n.name.clone())
            .collect();
        let reads: Vec<(usize, Option<usize>)> = vars
            .iter()
            .map(|v| {
                (
                    self.slot_of(v),
                    self.graph.mechanism_of(v).map(|r| self.slot_of(&r)),
                )
            })
            .collect();
        let blocks: Vec<Vec<Vec<u32>>> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let rows = BLOCK.min(n - b * BLOCK);
                let mut cols = vec![Vec::with_capacity(rows); reads.len()];
                let mut vals = vec![0usize; self.slots.len()];
                for _ in 0..rows {
                    for (i, slot) in self.slots.iter().enumerate() {
                        let base = self.row_of(slot, &vals) * slot.k;
                        vals[i] = draw(&slot.probs[base..base + slot.k], rng.random::<f64>());
                    }
                    for (col, &(s, r)) in cols.iter_mut().zip(&reads) {
                        let masked = r.is_some_and(|r| vals[r] == 1);
                        col.push(if masked { MISSING_CODE } else { vals[s] as u32 });
                    }
                }
                cols
            })
            .collect();
        let mut columns: Vec<Column> = vars
            .iter()
            .map(|v| Column {
                name: v.clone(),
                levels: self.domains[v].clone(),
                codes: Vec::with_capacity(n),
            })
            .collect();
        for block in blocks {
            for (c, part) in columns.iter_mut().zip(block) {
                c.codes.extend(part);
            }
        }
        Ok(Dataset::new(columns).expect("columns have equal length"))
    }

    /// The model with each assigned node's table replaced by a point mass
    /// on the given value (and its incoming edges ignored).
    pub fn intervene<S: AsRef<str>, T: AsRef<str>>(
        &self,
        assignments: &[(S, T)],
    ) -> Result<DiscreteModel, SimulationError> {
        let mut cpts = self.cpts.clone();
        for (node, value) in assignments {
            let (node, value) = (node.as_ref(), value.as_ref());
            let d = self
                .domains
                .get(node)
                .ok_or_else(|| SimulationError::UnknownNode(node.to_string()))?;
            let v =
                d.iter()
                    .position(|x| x == value)
                    .ok_or_else(|| SimulationError::UnknownValue {
                        node: node.to_string(),
                        value: value.to_string(),
                    })?;
            let mut probs = vec![0.0; d.len()];
            probs[v] = 1.0;
            cpts.insert(
                node.to_string(),
                Cpt {
                    node: node.to_string(),
                    parents: Vec::new(),
                    probs,
                },
            );
        }
        Self::assemble(
            self.graph.clone(),
            self.expanded.clone(),
            self.domains.clone(),
            cpts,
            self.order.clone(),
        )
    }
}

/// Inverse-CDF draw from `row` at uniform `u`.
fn draw(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// A model whose table entries are all at least `floor`: each row is
/// `floor + (1 − k·floor)·w` with `w` a normalized draw of `k` standard
/// exponentials. Deterministic under `seed`.
pub fn random_model(
    g: &MGraph,
    domains: &Domains,
    floor: f64,
    seed: u64,
) -> Result<DiscreteModel, SimulationError> {
    if !(floor > 0.0) {
        return Err(SimulationError::InvalidFloor(floor));
    }
    let expanded = expand_latents(g);
    let order = core_order(&expanded);
    let domains = resolve_domains(&expanded, &order, domains)?;
    let max_domain = domains.values().map(Vec::len).max().unwrap_or(1);
    if floor * max_domain as f64 >= 1.0 {
        return Err(SimulationError::FloorTooLarge { floor, max_domain });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpts = BTreeMap::new();
    for name in &order {
        let id = expanded.id(name).unwrap();
        let parents: Vec<String> = expanded
            .parents(id)
            .iter()
            .map(|&p| expanded.name(p).to_string())
            .collect();
        let k = domains[name].len();
        let rows: usize = parents.iter().map(|p| domains[p].len()).product();
        let mut probs = Vec::with_capacity(rows * k);
        for _ in 0..rows {
            let w: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = w.iter().sum();
            probs.extend(w.iter().map(|x| floor + (1.0 - k as f64 * floor) * x / s));
        }
        cpts.insert(
            name.clone(),
            Cpt {
                node: name.clone(),
                parents,
                probs,
            },
        );
    }
    DiscreteModel::assemble(g.clone(), expanded, domains, cpts, order)
}
