#![allow(dead_code)]

use misslab::causal::CausalQuery;
use misslab::estimation::Table;
use misslab::simulator::DiscreteModel;
use misslab::MGraph;
use proptest::prelude::*;

/// `P(y | x)` read off the exact joint.
pub fn target(m: &DiscreteModel, y: &[String], x: &[String]) -> Table {
    m.enumerate_joint().unwrap().conditional(y, x).unwrap()
}

/// `P(outcome | do(do_vars), context)` by intervening on every assignment
/// of the do-variables.
pub fn causal_target(m: &DiscreteModel, q: &CausalQuery) -> Table {
    let vars: Vec<String> = q
        .do_vars
        .iter()
        .chain(&q.context)
        .chain(&q.outcome)
        .cloned()
        .collect();
    let domains: Vec<Vec<String>> = vars.iter().map(|v| m.domain(v).unwrap().to_vec()).collect();
    let mut out = Table::zeros(vars.clone(), domains.clone());
    let nd = q.do_vars.len();
    let do_size: usize = domains[..nd].iter().map(Vec::len).product();
    let block = out.len() / do_size;
    for d in 0..do_size {
        let a = out.assignment(d * block);
        let assign: Vec<(&str, &str)> = (0..nd)
            .map(|i| (vars[i].as_str(), domains[i][a[i]].as_str()))
            .collect();
        let t = m
            .intervene(&assign)
            .unwrap()
            .enumerate_joint()
            .unwrap()
            .conditional(&q.outcome, &q.context)
            .unwrap();
        for k in 0..block {
            let a = out.assignment(d * block + k);
            let cell: Vec<(&str, &str)> = (nd..vars.len())
                .map(|i| (vars[i].as_str(), domains[i][a[i]].as_str()))
                .collect();
            out.probs_mut()[d * block + k] = t.get(&cell).unwrap();
        }
    }
    out
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Small standard m-graphs: variables `V0..` in topological order, each
/// fully or partially observed, with random forward edges, mechanism
/// parents and a few bidirected edges.
pub fn arb_graph(max_vars: usize) -> impl Strategy<Value = MGraph> {
    (2..=max_vars).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::bool::weighted(0.5), n),
            prop::collection::vec(prop::bool::weighted(0.4), n * n),
            prop::collection::vec(prop::bool::weighted(0.25), n * n),
            prop::collection::vec(prop::bool::weighted(0.08), n * n),
            prop::collection::vec(prop::bool::weighted(0.05), n * n),
        )
            .prop_map(move |(partial, edges, redges, bi, rbi)| {
                let name = |i: usize| format!("V{i}");
                let mut b = MGraph::builder();
                for (i, &p) in partial.iter().enumerate() {
                    b = if p {
                        b.partial(&name(i))
                    } else {
                        b.observed(&name(i))
                    };
                }
                for i in 0..n {
                    for j in i + 1..n {
                        if edges[i * n + j] {
                            b = b.edge(&name(i), &name(j));
                        }
                        if bi[i * n + j] {
                            b = b.biedge(&name(i), &name(j));
                        }
                    }
                    for j in 0..n {
                        if partial[j] && redges[i * n + j] {
                            b = b.edge(&name(i), &format!("R_{}", name(j)));
                        }
                        if partial[j] && rbi[i * n + j] {
                            b = b.biedge(&name(i), &format!("R_{}", name(j)));
                        }
                    }
                }
                b.build().unwrap()
            })
    })
}

/// Largest cell difference, treating `got` as constant along variables of
/// `want` that it does not mention.
pub fn max_diff_broadcast(got: &Table, want: &Table) -> f64 {
    assert!(
        got.vars().iter().all(|v| want.position(v).is_some()),
        "{:?} vs {:?}",
        got.vars(),
        want.vars()
    );
    let mut worst: f64 = 0.0;
    for idx in 0..want.len() {
        let a = want.assignment(idx);
        let cell: Vec<(&str, &str)> = got
            .vars()
            .iter()
            .map(|v| {
                let i = want.position(v).unwrap();
                (v.as_str(), want.domains()[i][a[i]].as_str())
            })
            .collect();
        let d = (got.get(&cell).unwrap() - want.probs()[idx]).abs();
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
    }
    worst
}
