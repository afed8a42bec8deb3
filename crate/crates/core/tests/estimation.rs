mod common;

use common::names;
use misslab::catalog;
use misslab::dsep::DsepEngine;
use misslab::estimand::parse_estimand;
use misslab::estimation::{
    ci_violation, empirical_distribution, evaluate, CiSpec, Dataset, Domains, EstimationError,
    ObservedDistribution, Source,
};
use misslab::recovery::{recover, recover_joint_rfactor, Query, SearchOptions};
use misslab::simulator::{random_model, DEFAULT_FLOOR};

#[test]
fn single_atom_is_a_marginal() {
    let g = catalog::obesity_mar();
    let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, 4).unwrap();
    let p = m.enumerate_observed().unwrap();
    let got = evaluate(&parse_estimand("P(A)").unwrap(), &p).unwrap();
    let want = m.enumerate_joint().unwrap().marginal(&["A"]).unwrap();
    assert!(got.max_abs_diff(&want).unwrap() < 1e-15);
}

#[test]
fn rfactor_estimand_gives_the_joint() {
    let g = catalog::pair_crossed();
    let e = recover_joint_rfactor(&g)
        .unwrap()
        .estimand()
        .cloned()
        .unwrap();
    let mut domains = Domains::new();
    domains.insert("Y".into(), names(&["lo", "mid", "hi"]));
    for seed in 0..10 {
        let m = random_model(&g, &domains, DEFAULT_FLOOR, seed).unwrap();
        let got = evaluate(&e, &m.enumerate_observed().unwrap()).unwrap();
        let want = m.enumerate_joint().unwrap().marginal(&["X", "Y"]).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-12, "seed {seed}");
    }
}

#[test]
fn empirical_estimates_approach_the_truth() {
    let g = catalog::pair_sequential();
    let q = Query::joint(&["X", "Y"]);
    let e = recover(&g, &q, SearchOptions::default())
        .unwrap()
        .estimand()
        .cloned()
        .unwrap();
    let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, 8).unwrap();
    let truth = m.enumerate_joint().unwrap().marginal(&["X", "Y"]).unwrap();
    let d = m.sample(400_000, 1).unwrap();
    let p = empirical_distribution(&d, &g, Some(m.domains())).unwrap();
    assert_eq!(p.source, Source::Empirical { n: 400_000 });
    let err = evaluate(&e, &p).unwrap().l1(&truth).unwrap();
    assert!(err < 0.01, "{err}");
}

#[test]
fn csv_round_trip_preserves_the_distribution() {
    let g = catalog::obesity_mnar();
    let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, 2).unwrap();
    let d = m.sample(2_000, 9).unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf, "NA").unwrap();
    let back = Dataset::read_csv(buf.as_slice(), "NA").unwrap();
    let a = empirical_distribution(&d, &g, Some(m.domains())).unwrap();
    let b = empirical_distribution(&back, &g, Some(m.domains())).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_fully_observed_entry_is_rejected() {
    let g = catalog::obesity_mar();
    let rows = vec![names(&["1", "0", "NA"]), names(&["NA", "1", "0"])];
    let d = Dataset::from_rows(&names(&["A", "G", "O"]), &rows, "NA").unwrap();
    assert!(matches!(
        empirical_distribution(&d, &g, None),
        Err(EstimationError::DomainMismatch { .. })
    ));
}

#[test]
fn zero_mass_conditioning_is_an_error() {
    // Every O is missing, so P(O* | R_O = 0) has nothing to condition on.
    let g = catalog::obesity_mar();
    let rows = vec![names(&["1", "0", "NA"]), names(&["0", "1", "NA"])];
    let d = Dataset::from_rows(&names(&["A", "G", "O"]), &rows, "NA").unwrap();
    let mut domains = Domains::new();
    domains.insert("O".into(), names(&["0", "1"]));
    let p = empirical_distribution(&d, &g, Some(&domains)).unwrap();
    let e = recover(
        &g,
        &Query::joint(&["A", "G", "O"]),
        SearchOptions::default(),
    )
    .unwrap()
    .estimand()
    .cloned()
    .unwrap();
    assert!(matches!(
        evaluate(&e, &p),
        Err(EstimationError::ZeroProbabilityConditioning(_))
    ));
}

/// Random tables should be faithful: every pair the graph leaves connected
/// given the empty set is visibly dependent.
#[test]
fn random_models_are_faithful_on_marginal_pairs() {
    for (name, g) in catalog::all() {
        let m = random_model(&g, &Domains::new(), DEFAULT_FLOOR, 5).unwrap();
        let joint = ObservedDistribution {
            table: m.enumerate_joint().unwrap(),
            source: Source::Exact,
        };
        let vars = joint.table.vars().to_vec();
        let eng = DsepEngine::new(&g);
        for (i, a) in vars.iter().enumerate() {
            for b in &vars[i + 1..] {
                let separated = eng.separated_names(&[a], &[b], &[]).unwrap();
                let spec = CiSpec {
                    x: vec![a.clone()],
                    y: vec![b.clone()],
                    given: vec![],
                    fixed: vec![],
                };
                let v = ci_violation(&spec, &joint).unwrap();
                if separated {
                    assert!(v < 1e-12, "{name}: {a} ⊥ {b} violated by {v}");
                } else {
                    assert!(v > 1e-6, "{name}: {a}, {b} look independent ({v})");
                }
            }
        }
    }
}
