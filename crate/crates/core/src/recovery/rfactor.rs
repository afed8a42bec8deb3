use std::collections::BTreeSet;

use super::paths::Marks;
use super::{
    certificate, sep_justification, NonRecoverability, Query, RecoveryError, RecoveryOutcome,
};
use crate::dsep::{DsepEngine, SepOptions};
use crate::estimand::{substitute_proxies, Estimand, Method, RecoveryCertificate, Term};
use crate::graph::{mechanism_name, MGraph, NodeKind};

fn r_edges(g: &MGraph) -> Vec<String> {
    let mut out: Vec<String> = g
        .directed_edges()
        .filter(|&(a, b)| g.kind(a) == NodeKind::Mechanism && g.kind(b) == NodeKind::Mechanism)
        .map(|(a, b)| format!("{} -> {}", g.name(a), g.name(b)))
        .collect();
    out.extend(
        g.bidirected_edges()
            .filter(|&(a, b)| g.kind(a) == NodeKind::Mechanism && g.kind(b) == NodeKind::Mechanism)
            .map(|(a, b)| format!("{} <-> {}", g.name(a), g.name(b))),
    );
    out
}

/// Recovers the joint over `V_o ∪ V_m` as `P(R=0)·P(V*|R=0)` divided by
/// `P(R_X=0 | Mb(R_X), R_Mb=0)` for every partially observed `X`, when no
/// mechanism is adjacent to or collider-connected with its own variable.
pub fn recover_joint_rfactor(g: &MGraph) -> Result<RecoveryOutcome, RecoveryError> {
    if !g.is_standard() {
        return Err(crate::taxonomy::TaxonomyError::ModelOutsideStandardClass(
            g.mechanism_child_violations(),
        )
        .into());
    }
    let vm = g.partial();
    if vm.is_empty() {
        return Err(RecoveryError::NoPartialVariables);
    }
    let bad = r_edges(g);
    if !bad.is_empty() {
        return Err(RecoveryError::REdgesPresent(bad));
    }
    let marks = Marks::new(g);
    let substantive = |v| {
        matches!(
            g.kind(v),
            NodeKind::FullyObserved | NodeKind::PartiallyObserved
        )
    };
    for x in &vm {
        if let Some(w) = marks.witness(x, substantive) {
            return Ok(RecoveryOutcome::NonRecoverable(NonRecoverability {
                witness: w,
                sub_query: "joint distribution".into(),
                extension: false,
                notes: Vec::new(),
            }));
        }
    }

    let engine = DsepEngine::new(g);
    let vo = g.observed();
    let all_r: Vec<String> = vm.iter().map(|v| mechanism_name(v)).collect();
    let universe: BTreeSet<String> = vm.iter().chain(&vo).chain(&all_r).cloned().collect();
    let zero = |names: &mut dyn Iterator<Item = &String>| -> Vec<Term> {
        names.map(|r| Term::fixed(r, "0")).collect()
    };

    let numerator = Estimand::product(vec![
        Estimand::atom(zero(&mut all_r.iter()), vec![]),
        Estimand::atom(
            vm.iter().chain(&vo).map(|v| Term::var(v)).collect(),
            zero(&mut all_r.iter()),
        ),
    ]);
    let mut denominators = Vec::new();
    let mut justifications = Vec::new();
    for x in &vm {
        let r = mechanism_name(x);
        let mb = engine
            .markov_blanket(&r, SepOptions::default())
            .expect("mechanism exists");
        if let Some(l) = mb
            .iter()
            .find(|v| g.kind_of(v) != Some(NodeKind::FullyObserved) && !g.is_partial(v))
        {
            return Ok(RecoveryOutcome::Unknown(format!(
                "Markov blanket of {r} contains the unobserved node {l}"
            )));
        }
        let mb_r: BTreeSet<String> = mb
            .iter()
            .filter(|v| g.is_partial(v))
            .map(|v| mechanism_name(v))
            .collect();
        let mut conds: Vec<Term> = mb.iter().map(|v| Term::var(v)).collect();
        conds.extend(zero(&mut mb_r.iter()));
        denominators.push(Estimand::atom(vec![Term::fixed(&r, "0")], conds));

        let mut z = mb.clone();
        z.extend(mb_r.iter().cloned());
        let rest: BTreeSet<String> = universe
            .iter()
            .filter(|v| **v != r && !z.contains(*v))
            .cloned()
            .collect();
        if !rest.is_empty() {
            justifications.push(sep_justification(
                &[r.clone()].into_iter().collect(),
                &rest,
                &z,
            ));
        }
    }
    let raw = Estimand::quotient(numerator, Estimand::product(denominators));
    let estimand = substitute_proxies(&raw, g).expect("every partial variable is guarded");
    Ok(RecoveryOutcome::Recovered(certificate(
        estimand,
        Method::RFactorization,
        justifications,
    )))
}

/// Turns a recovered joint over `joint` into the estimand for `q` by
/// summing out and dividing.
pub(super) fn restrict_to_query(
    mut cert: RecoveryCertificate,
    joint: &BTreeSet<String>,
    q: &Query,
) -> RecoveryCertificate {
    let keep: BTreeSet<&String> = q.targets().iter().chain(q.context()).collect();
    let drop: Vec<&String> = joint.iter().filter(|v| !keep.contains(v)).collect();
    let num = Estimand::sum_over_all(&drop, cert.estimand.clone());
    cert.estimand = if q.context().is_empty() {
        num
    } else {
        let mut drop_den = drop.clone();
        drop_den.extend(q.targets());
        drop_den.sort();
        Estimand::quotient(
            num,
            Estimand::sum_over_all(&drop_den, cert.estimand.clone()),
        )
    };
    if !drop.is_empty() || !q.context().is_empty() {
        cert.notes
            .push("obtained from the recovered joint by marginalization".into());
    }
    cert
}

/// Looks for a target `v` of `P(y | x)` that is adjacent to its mechanism or
/// joined to it by a path whose intermediate nodes are all colliders in the
/// conditioning set `x ∪ y \ {v}`.
pub fn certify_nonrecoverable(
    g: &MGraph,
    y: &[String],
    x: &[String],
) -> Result<Option<NonRecoverability>, RecoveryError> {
    Query::Conditional {
        y: y.to_vec(),
        x: x.to_vec(),
    }
    .check(g)?;
    let marks = Marks::new(g);
    let mut targets = y.to_vec();
    targets.sort();
    for v in &targets {
        if !g.is_partial(v) {
            continue;
        }
        let context: Vec<String> = x.iter().chain(y).filter(|w| *w != v).cloned().collect();
        let ids: BTreeSet<_> = context.iter().filter_map(|w| g.id(w)).collect();
        if let Some(witness) = marks.witness(v, |w| ids.contains(&w)) {
            let mut sorted = context.clone();
            sorted.sort();
            let sub_query = if sorted.is_empty() {
                format!("P({v})")
            } else {
                format!("P({v}|{})", sorted.join(","))
            };
            return Ok(Some(NonRecoverability {
                witness,
                sub_query,
                extension: y.len() > 1,
                notes: Vec::new(),
            }));
        }
    }
    Ok(None)
}
