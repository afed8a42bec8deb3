mod common;

use common::{arb_graph, causal_target, max_diff_broadcast, target};
use misslab::causal::{recover_causal, CausalOptions, CausalQuery};
use misslab::dsep::{DsepEngine, SepQuery};
use misslab::estimation::{ci_violation, evaluate, CiSpec, Domains, ObservedDistribution, Source};
use misslab::recovery::{recover, Query, RecoveryOutcome, SearchOptions};
use misslab::simulator::{random_model, DEFAULT_FLOOR};
use misslab::taxonomy::{classify, classify_by_dsep, classify_by_edges, MissingnessClass};
use misslab::testability::{mar_test_suite, testable_implications};
use misslab::MGraph;
use proptest::prelude::*;

fn subsets(g: &MGraph, picks: &[u8]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let names: Vec<String> = g.nodes().iter().map(|n| n.name.clone()).collect();
    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (n, &p) in names.iter().zip(picks) {
        match p % 5 {
            0 => x.push(n.clone()),
            1 => y.push(n.clone()),
            2 => z.push(n.clone()),
            _ => {}
        }
    }
    (x, y, z)
}

fn joint_columns(g: &MGraph) -> Vec<String> {
    g.observed()
        .into_iter()
        .chain(g.partial())
        .chain(g.mechanisms())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bayes_ball_agrees_with_moralization(g in arb_graph(5), picks in prop::collection::vec(any::<u8>(), 20)) {
        let (x, y, z) = subsets(&g, &picks);
        prop_assume!(!x.is_empty() && !y.is_empty());
        let e = DsepEngine::new(&g);
        let q = SepQuery::new(&x, &y, &z);
        let a = e.separated(&q).unwrap();
        prop_assert_eq!(a, e.separated_moral(&q).unwrap());
        prop_assert_eq!(a, e.separated(&q.swapped()).unwrap());
    }

    #[test]
    fn taxonomy_routes_agree(g in arb_graph(5)) {
        prop_assert_eq!(classify_by_dsep(&g).unwrap(), classify_by_edges(&g).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn separations_hold_in_the_joint(g in arb_graph(4), seed in any::<u64>(), picks in prop::collection::vec(any::<u8>(), 12)) {
        let cols = joint_columns(&g);
        let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for (c, &p) in cols.iter().zip(&picks) {
            match p % 4 {
                0 => x.push(c.clone()),
                1 => y.push(c.clone()),
                2 => z.push(c.clone()),
                _ => {}
            }
        }
        prop_assume!(!x.is_empty() && !y.is_empty());
        if DsepEngine::new(&g).separated(&SepQuery::new(&x, &y, &z)).unwrap() {
            let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, seed).unwrap();
            let p = ObservedDistribution { table: m.enumerate_joint().unwrap(), source: Source::Exact };
            let spec = CiSpec { x, y, given: z, fixed: vec![] };
            prop_assert!(ci_violation(&spec, &p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn recovered_estimands_are_consistent(g in arb_graph(4), seed in any::<u64>(), pick in any::<usize>()) {
        let vars: Vec<String> = g.observed().into_iter().chain(g.partial()).collect();
        let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, seed).unwrap();
        let p = m.enumerate_observed().unwrap();
        let a = vars[pick % vars.len()].clone();
        let b = vars[(pick / 7 + 1) % vars.len()].clone();
        let mut queries = vec![Query::joint(&vars)];
        if a != b {
            queries.push(Query::conditional(&[a.clone()], &[b.clone()]));
        }
        for q in queries {
            if let RecoveryOutcome::Recovered(cert) = recover(&g, &q, SearchOptions::default()).unwrap() {
                prop_assert!(cert.verify(&g));
                let got = evaluate(&cert.estimand, &p).unwrap();
                let want = target(&m, q.targets(), q.context());
                let err = got.max_abs_diff(&want).unwrap();
                prop_assert!(err <= 1e-10, "{} via {}: error {}", q, cert.estimand, err);
            }
        }
    }

    #[test]
    fn causal_estimands_are_consistent(g in arb_graph(4), seed in any::<u64>(), pick in any::<usize>()) {
        let vars: Vec<String> = g.observed().into_iter().chain(g.partial()).collect();
        let x = vars[pick % vars.len()].clone();
        let y = vars[(pick / 5 + 1) % vars.len()].clone();
        prop_assume!(x != y);
        let q = CausalQuery::new(&[y], &[x]);
        let opts = CausalOptions { state_budget: 2_000, ..CausalOptions::default() };
        if let RecoveryOutcome::Recovered(cert) = recover_causal(&g, &q, opts).unwrap() {
            let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, seed).unwrap();
            let got = evaluate(&cert.estimand, &m.enumerate_observed().unwrap()).unwrap();
            let err = max_diff_broadcast(&got, &causal_target(&m, &q));
            prop_assert!(err <= 1e-10, "{} via {}: error {}", q, cert.estimand, err);
        }
    }

    #[test]
    fn test_equations_hold_in_the_model(g in arb_graph(4), seed in any::<u64>()) {
        let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, seed).unwrap();
        let p = m.enumerate_observed().unwrap();
        for (claim, eq) in testable_implications(&g).unwrap() {
            let v = ci_violation(&eq.ci, &p).unwrap();
            prop_assert!(v <= 1e-10, "{} ({}) violated by {}", claim, eq, v);
        }
        if matches!(classify(&g).unwrap(), MissingnessClass::Mar | MissingnessClass::Mcar) && !g.partial().is_empty() {
            for t in mar_test_suite(&g.partial(), &g.observed()).unwrap().tests {
                prop_assert!(ci_violation(&t.equation.ci, &p).unwrap() <= 1e-10, "{}", t.equation);
            }
        }
    }
}
