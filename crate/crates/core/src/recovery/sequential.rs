use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{certificate, sep_justification, Query, RecoveryError, RecoveryOutcome, SearchOptions};
use crate::dsep::{subsets_by_size, DsepEngine, SepQuery};
use crate::estimand::{
    substitute_proxies, Estimand, Justification, Method, RecoveryCertificate, Term,
};
use crate::graph::{mechanism_name, MGraph};

/// One factor `P(target | given)` of an ordered factorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub target: Vec<String>,
    pub given: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub order: Vec<String>,
    pub factors: Vec<Factor>,
}

impl Factorization {
    /// The factorization as an (unrecovered) estimand.
    pub fn estimand(&self) -> Estimand {
        Estimand::product(
            self.factors
                .iter()
                .map(|f| {
                    Estimand::atom(
                        f.target.iter().map(|v| Term::var(v)).collect(),
                        f.given.iter().map(|v| Term::var(v)).collect(),
                    )
                })
                .collect(),
        )
    }
}

fn sep(
    engine: &DsepEngine,
    x: &BTreeSet<String>,
    y: &BTreeSet<String>,
    z: &BTreeSet<String>,
) -> bool {
    y.is_empty()
        || engine
            .separated(&SepQuery {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
            })
            .expect("names come from the graph")
}

/// Smallest (then lexicographically first) `M ⊆ pool` with
/// `b ⊥ pool \ M | M ∪ base`.
fn minimal_subset(
    engine: &DsepEngine,
    b: &BTreeSet<String>,
    pool: &[String],
    base: &BTreeSet<String>,
) -> BTreeSet<String> {
    for m in subsets_by_size(pool, pool.len()) {
        let m: BTreeSet<String> = m.into_iter().collect();
        let rest: BTreeSet<String> = pool.iter().filter(|v| !m.contains(*v)).cloned().collect();
        let mut z = m.clone();
        z.extend(base.iter().cloned());
        if sep(engine, b, &rest, &z) {
            return m;
        }
    }
    unreachable!("the whole pool always qualifies")
}

/// Enumerates ordered factorizations `Π P(Y_i | X_i)` with `X_i` a minimal
/// subset of the later variables and `x`. Orderings are visited in
/// lexicographic order; at most `limit` are returned.
pub fn ordered_factorizations(
    g: &MGraph,
    y: &[String],
    x: &[String],
    limit: usize,
) -> Result<Vec<Factorization>, RecoveryError> {
    Query::Conditional {
        y: y.to_vec(),
        x: x.to_vec(),
    }
    .check(g)?;
    let engine = DsepEngine::new(g);
    let mut sorted = y.to_vec();
    sorted.sort();
    let mut out = Vec::new();
    let mut perm = sorted.clone();
    loop {
        if out.len() >= limit {
            break;
        }
        let factors = perm
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let pool: Vec<String> = perm[i + 1..].iter().chain(x).cloned().collect();
                let m = minimal_subset(
                    &engine,
                    &[v.clone()].into_iter().collect(),
                    &pool,
                    &BTreeSet::new(),
                );
                Factor {
                    target: vec![v.clone()],
                    given: pool.into_iter().filter(|p| m.contains(p)).collect(),
                }
            })
            .collect();
        out.push(Factorization {
            order: perm.clone(),
            factors,
        });
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Conditioning context carried through a sequential search: free
/// variables and fixed terms (typically `R_X = 0`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct SeqContext {
    pub free: Vec<String>,
    pub fixed: Vec<Term>,
}

impl SeqContext {
    fn names(&self) -> BTreeSet<String> {
        self.free
            .iter()
            .cloned()
            .chain(self.fixed.iter().map(|t| t.var.name.clone()))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct BlockFactor {
    estimand: Estimand,
    justifications: Vec<Justification>,
}

struct Search<'a> {
    g: &'a MGraph,
    engine: &'a DsepEngine,
    ctx: &'a SeqContext,
    ctx_names: BTreeSet<String>,
    memo: HashMap<(Vec<String>, Vec<String>), Option<BlockFactor>>,
    evaluated: usize,
    budget: usize,
    exhausted: bool,
    want: usize,
    found: Vec<Vec<BlockFactor>>,
}

impl Search<'_> {
    fn block(&mut self, b: &[String], later: &[String]) -> Option<BlockFactor> {
        let key = (b.to_vec(), later.to_vec());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        self.evaluated += 1;
        let result = self.eval_block(b, later);
        self.memo.insert(key, result.clone());
        result
    }

    fn eval_block(&self, b: &[String], later: &[String]) -> Option<BlockFactor> {
        let bset: BTreeSet<String> = b.iter().cloned().collect();
        let m = minimal_subset(self.engine, &bset, later, &self.ctx_names);
        let rest: BTreeSet<String> = later.iter().filter(|v| !m.contains(*v)).cloned().collect();
        let mut cond = m.clone();
        cond.extend(self.ctx_names.iter().cloned());

        let fixed: BTreeSet<String> = self.ctx.fixed.iter().map(|t| t.var.name.clone()).collect();
        let needed: BTreeSet<String> = b
            .iter()
            .chain(&m)
            .chain(&self.ctx.free)
            .filter(|v| self.g.is_partial(v))
            .map(|v| mechanism_name(v))
            .filter(|r| !fixed.contains(r))
            .collect();
        if !sep(self.engine, &bset, &needed, &cond) {
            return None;
        }

        let mut justifications = Vec::new();
        if !rest.is_empty() {
            justifications.push(sep_justification(&bset, &rest, &cond));
        }
        if !needed.is_empty() {
            justifications.push(sep_justification(&bset, &needed, &cond));
        }
        let mut conds: Vec<Term> = m
            .iter()
            .chain(&self.ctx.free)
            .map(|v| Term::var(v))
            .collect();
        conds.extend(self.ctx.fixed.iter().cloned());
        conds.extend(needed.iter().map(|r| Term::fixed(r, "0")));
        let raw = Estimand::atom(b.iter().map(|v| Term::var(v)).collect(), conds);
        let estimand = substitute_proxies(&raw, self.g).ok()?;
        Some(BlockFactor {
            estimand,
            justifications,
        })
    }

    /// Ordered partitions of `remaining` into exactly `k` blocks; larger
    /// leading blocks first, then lexicographic.
    fn run(&mut self, remaining: &[String], k: usize, prefix: &mut Vec<BlockFactor>) {
        if self.found.len() >= self.want || self.exhausted {
            return;
        }
        if k == 1 {
            if self.evaluated >= self.budget {
                self.exhausted = true;
                return;
            }
            if let Some(f) = self.block(remaining, &[]) {
                prefix.push(f);
                self.found.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let n = remaining.len();
        for size in (1..=n + 1 - k).rev() {
            for pick in subsets_of_size(remaining, size) {
                if self.found.len() >= self.want || self.exhausted {
                    return;
                }
                if self.evaluated >= self.budget {
                    self.exhausted = true;
                    return;
                }
                let later: Vec<String> = remaining
                    .iter()
                    .filter(|v| !pick.contains(v))
                    .cloned()
                    .collect();
                if let Some(f) = self.block(&pick, &later) {
                    prefix.push(f);
                    self.run(&later, k - 1, prefix);
                    prefix.pop();
                }
            }
        }
    }
}

fn subsets_of_size(items: &[String], size: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    crate::dsep::for_each_combination(items.len(), size, |idx| {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
    });
    out
}

/// Sequential recovery generalized to blocks: `P(Y | ctx)` is split into
/// ordered blocks `B_1, …, B_k` with `P(B_i | M_i, ctx)` for a minimal
/// `M_i` among the later blocks, and each factor must satisfy
/// `B_i ⊥ R_(B_i ∪ M_i ∪ ctx) | M_i, ctx`. Singleton blocks give the
/// classical ordered factorization. Returns the certificates found (up to
/// `want`) and whether the budget ran out.
pub(crate) fn recover_block_sequential(
    g: &MGraph,
    engine: &DsepEngine,
    targets: &[String],
    ctx: &SeqContext,
    opts: SearchOptions,
    want: usize,
) -> (Vec<RecoveryCertificate>, bool) {
    let mut sorted = targets.to_vec();
    sorted.sort();
    let mut search = Search {
        g,
        engine,
        ctx,
        ctx_names: ctx.names(),
        memo: HashMap::new(),
        evaluated: 0,
        budget: opts.budget,
        exhausted: false,
        want,
        found: Vec::new(),
    };

    if sorted.len() > 7 {
        // Heuristic first: children before parents, one variable at a time.
        let pos: HashMap<String, usize> = g
            .topological_order()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (g.name(v).to_string(), i))
            .collect();
        let mut order = sorted.clone();
        order.sort_by_key(|v| std::cmp::Reverse(pos[v]));
        let mut prefix = Vec::new();
        for (i, v) in order.iter().enumerate() {
            let mut later = order[i + 1..].to_vec();
            later.sort();
            match search.block(&[v.clone()], &later) {
                Some(f) => prefix.push(f),
                None => break,
            }
        }
        if prefix.len() == order.len() {
            search.found.push(prefix);
        }
    }

    for k in 1..=sorted.len() {
        if search.found.len() >= want || search.exhausted {
            break;
        }
        search.run(&sorted, k, &mut Vec::new());
    }

    let certs = search
        .found
        .iter()
        .map(|factors| {
            let estimand = Estimand::product(factors.iter().map(|f| f.estimand.clone()).collect());
            let justifications = factors
                .iter()
                .flat_map(|f| f.justifications.clone())
                .collect();
            certificate(estimand, Method::SequentialFactorization, justifications)
        })
        .collect();
    (certs, search.exhausted)
}

pub fn recover_sequential(
    g: &MGraph,
    q: &Query,
    opts: SearchOptions,
) -> Result<RecoveryOutcome, RecoveryError> {
    q.check(g)?;
    let engine = DsepEngine::new(g);
    let ctx = SeqContext {
        free: q.context().to_vec(),
        fixed: Vec::new(),
    };
    let (mut certs, exhausted) = recover_block_sequential(g, &engine, q.targets(), &ctx, opts, 1);
    Ok(match certs.pop() {
        Some(c) => RecoveryOutcome::Recovered(c),
        None if exhausted => RecoveryOutcome::Unknown(format!(
            "sequential search budget of {} candidate factors exhausted",
            opts.budget
        )),
        None => RecoveryOutcome::Unknown("no admissible ordered factorization".into()),
    })
}

/// Every admissible sequential factorization found, up to `limit`.
pub fn sequential_factorizations(
    g: &MGraph,
    q: &Query,
    opts: SearchOptions,
    limit: usize,
) -> Result<Vec<RecoveryCertificate>, RecoveryError> {
    q.check(g)?;
    let engine = DsepEngine::new(g);
    let ctx = SeqContext {
        free: q.context().to_vec(),
        fixed: Vec::new(),
    };
    Ok(recover_block_sequential(g, &engine, q.targets(), &ctx, opts, limit).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn recovered(g: &MGraph, q: Query) -> String {
        match recover_sequential(g, &q, SearchOptions::default()).unwrap() {
            RecoveryOutcome::Recovered(c) => {
                assert!(c.verify(g));
                c.estimand.render()
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eq2() {
        assert_eq!(
            recovered(&catalog::obesity_mar(), Query::joint(&["G", "O", "A"])),
            "P(A)·P(G,O*|A,R_O=0)"
        );
    }

    #[test]
    fn example4() {
        assert_eq!(
            recovered(&catalog::pair_sequential(), Query::joint(&["X", "Y"])),
            "P(X*|R_X=0)·P(Y*|X*,R_X=0,R_Y=0)"
        );
    }

    #[test]
    fn pair_crossed_has_no_sequential_form() {
        let out = recover_sequential(
            &catalog::pair_crossed(),
            &Query::joint(&["X", "Y"]),
            SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(
            out,
            RecoveryOutcome::Unknown("no admissible ordered factorization".into())
        );
    }

    #[test]
    fn budget_is_reported() {
        let out = recover_sequential(
            &catalog::pair_crossed(),
            &Query::joint(&["X", "Y"]),
            SearchOptions { budget: 1 },
        )
        .unwrap();
        assert!(matches!(out, RecoveryOutcome::Unknown(r) if r.contains("budget")));
    }

    #[test]
    fn literal_ordered_factorizations() {
        let f =
            ordered_factorizations(&catalog::pair_sequential(), &s(&["X", "Y"]), &[], 10).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].order, s(&["Y", "X"]));
        assert_eq!(f[1].estimand().render(), "P(X)·P(Y|X)");
        let single =
            ordered_factorizations(&catalog::pair_sequential(), &s(&["X"]), &[], 10).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].factors.len(), 1);
        let g = MGraph::builder()
            .observed("A")
            .observed("B")
            .build()
            .unwrap();
        let f = ordered_factorizations(&g, &s(&["A", "B"]), &[], 10).unwrap();
        assert_eq!(f[0].estimand().render(), "P(A)·P(B)");
    }

    #[test]
    fn all_factorizations_flag() {
        let all = sequential_factorizations(
            &catalog::obesity_mar(),
            &Query::joint(&["A", "G", "O"]),
            SearchOptions::default(),
            100,
        )
        .unwrap();
        assert!(all.len() > 1);
        assert_eq!(all[0].estimand.render(), "P(A)·P(G,O*|A,R_O=0)");
    }

    #[test]
    fn permutations() {
        let mut v = vec![1, 2, 3];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 6);
    }
}
