//! Causal effects under missingness: back-door adjustment and a bounded
//! derivation search over the three do-calculus rules.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{subsets_by_size, DsepEngine, SepQuery};
use crate::estimand::{
    substitute_proxies, Estimand, Justification, Method, ProbAtom, RecoveryCertificate, Term,
};
use crate::graph::{mechanism_name, MGraph, NodeKind};
use crate::recovery::{recover_block_sequential, RecoveryOutcome, SearchOptions, SeqContext};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CausalError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("bad causal query: {0}")]
    BadQuery(String),
    #[error("not a standard m-graph")]
    ModelOutsideStandardClass,
}

/// `P(outcome | do(do_vars), context)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub outcome: Vec<String>,
    pub do_vars: Vec<String>,
    #[serde(default)]
    pub context: Vec<String>,
}

impl CausalQuery {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(outcome: &[S], do_vars: &[T]) -> Self {
        CausalQuery {
            outcome: outcome.iter().map(|s| s.as_ref().to_string()).collect(),
            do_vars: do_vars.iter().map(|s| s.as_ref().to_string()).collect(),
            context: Vec::new(),
        }
    }

    pub fn atom(&self) -> ProbAtom {
        ProbAtom::new(
            self.outcome.iter().map(|v| Term::var(v)).collect(),
            self.context.iter().map(|v| Term::var(v)).collect(),
        )
        .with_do(self.do_vars.iter().map(|v| Term::var(v)).collect())
    }

    fn check(&self, g: &MGraph) -> Result<(), CausalError> {
        if self.outcome.is_empty() {
            return Err(CausalError::BadQuery("no outcome".into()));
        }
        let mut seen = BTreeSet::new();
        for v in self
            .outcome
            .iter()
            .chain(&self.do_vars)
            .chain(&self.context)
        {
            match g.kind_of(v) {
                None => return Err(CausalError::UnknownNode(v.clone())),
                Some(NodeKind::FullyObserved | NodeKind::PartiallyObserved) => {}
                Some(_) => {
                    return Err(CausalError::BadQuery(format!(
                        "{v} is not a substantive variable"
                    )))
                }
            }
            if !seen.insert(v) {
                return Err(CausalError::BadQuery(format!("{v} appears twice")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CausalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Insert or delete an observation.
    One,
    /// Exchange an action for an observation.
    Two,
    /// Insert or delete an action.
    Three,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Rule::One => 1,
            Rule::Two => 2,
            Rule::Three => 3,
        };
        write!(f, "rule {n}")
    }
}

fn names(ts: &[Term]) -> BTreeSet<String> {
    ts.iter().map(|t| t.var.name.clone()).collect()
}

/// Checks `rule` on the fragment `atom` for the variables `w`: for rule 1,
/// `w` is an observation to insert or delete; for rules 2 and 3, `w` are
/// do-variables of the atom. Returns the justification when the rule
/// applies.
fn rule_check(
    engine: &DsepEngine,
    rule: Rule,
    atom: &ProbAtom,
    w: &BTreeSet<String>,
) -> Option<Justification> {
    if w.is_empty() {
        return None;
    }
    let y = names(&atom.targets);
    let do_all = names(&atom.do_vars);
    let (x, z): (BTreeSet<String>, BTreeSet<String>) = match rule {
        Rule::One => (
            do_all,
            names(&atom.conditions).difference(w).cloned().collect(),
        ),
        Rule::Two | Rule::Three => {
            if !w.is_subset(&do_all) {
                return None;
            }
            (
                do_all.difference(w).cloned().collect(),
                names(&atom.conditions),
            )
        }
    };
    if y.iter().any(|v| w.contains(v)) {
        return None;
    }
    let mut given = x.clone();
    given.extend(z.iter().cloned());
    let claim = SepQuery {
        x: y,
        y: w.clone(),
        z: given,
    };
    let (overline, underline) = match rule {
        Rule::One => (x.clone(), BTreeSet::new()),
        Rule::Two => (x.clone(), w.clone()),
        Rule::Three => {
            let gx = engine.mutilated(&x, &BTreeSet::new());
            let eg = gx.graph();
            let zids: Vec<_> = z.iter().filter_map(|v| eg.id(v)).collect();
            let anc: BTreeSet<String> = eg
                .ancestors_of(&zids)
                .into_iter()
                .map(|v| eg.name(v).to_string())
                .collect();
            let mut over = x.clone();
            over.extend(w.iter().filter(|v| !anc.contains(*v)).cloned());
            (over, BTreeSet::new())
        }
    };
    let ok = engine
        .mutilated(&overline, &underline)
        .separated(&claim)
        .ok()?;
    ok.then(|| Justification {
        claim,
        overline,
        underline,
        note: rule.to_string(),
    })
}

/// Whether `rule` licenses rewriting `atom` with respect to `w`.
pub fn rule_applicable(
    g: &MGraph,
    rule: Rule,
    atom: &ProbAtom,
    w: &[String],
) -> Result<bool, CausalError> {
    for n in atom.names().iter().chain(w) {
        if !g.contains(n) {
            return Err(CausalError::UnknownNode(n.clone()));
        }
    }
    let w: BTreeSet<String> = w.iter().cloned().collect();
    if w.is_empty() {
        // Nothing to insert, delete or exchange.
        return Ok(true);
    }
    Ok(rule_check(&DsepEngine::new(g), rule, atom, &w).is_some())
}

/// The rewritten atom after applying `rule` to `w` (rule 1 toggles `w` in
/// the conditions, rule 2 moves it from do() to the conditions, rule 3 drops
/// it from do()). `None` when the rule does not apply.
pub fn apply_rule(
    g: &MGraph,
    rule: Rule,
    atom: &ProbAtom,
    w: &[String],
) -> Result<Option<ProbAtom>, CausalError> {
    if !rule_applicable(g, rule, atom, w)? {
        return Ok(None);
    }
    let ws: BTreeSet<&String> = w.iter().collect();
    let mut out = atom.clone();
    match rule {
        Rule::One => {
            let present = out.conditions.iter().any(|t| ws.contains(&t.var.name));
            if present {
                out.conditions.retain(|t| !ws.contains(&t.var.name));
            } else {
                out.conditions.extend(w.iter().map(|v| Term::var(v)));
            }
        }
        Rule::Two => {
            let moved: Vec<Term> = out
                .do_vars
                .iter()
                .filter(|t| ws.contains(&t.var.name))
                .cloned()
                .collect();
            out.do_vars.retain(|t| !ws.contains(&t.var.name));
            out.conditions.extend(moved);
        }
        Rule::Three => out.do_vars.retain(|t| !ws.contains(&t.var.name)),
    }
    Ok(Some(out))
}

/// A back-door admissible set for the effect of `x` on `y`, searched among
/// observable non-descendants of `x` by size, then lexicographically.
pub fn identify_by_adjustment(
    g: &MGraph,
    x: &[String],
    y: &[String],
) -> Result<Option<BTreeSet<String>>, CausalError> {
    for n in x.iter().chain(y) {
        if !g.contains(n) {
            return Err(CausalError::UnknownNode(n.clone()));
        }
    }
    let engine = DsepEngine::new(g);
    let xs: BTreeSet<String> = x.iter().cloned().collect();
    let ys: BTreeSet<String> = y.iter().cloned().collect();
    let xids: Vec<_> = x.iter().filter_map(|v| g.id(v)).collect();
    let desc: BTreeSet<String> = g
        .descendants_of(&xids)
        .into_iter()
        .map(|v| g.name(v).to_string())
        .collect();
    let candidates: Vec<String> = g
        .ids()
        .filter(|&v| {
            matches!(
                g.kind(v),
                NodeKind::FullyObserved | NodeKind::PartiallyObserved
            )
        })
        .map(|v| g.name(v).to_string())
        .filter(|v| !xs.contains(v) && !ys.contains(v) && !desc.contains(v))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let cut = engine.mutilated(&BTreeSet::new(), &xs);
    for s in subsets_by_size(&candidates, candidates.len()) {
        let z: BTreeSet<String> = s.into_iter().collect();
        if cut
            .separated(&SepQuery {
                x: ys.clone(),
                y: xs.clone(),
                z: z.clone(),
            })
            .unwrap_or(false)
        {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CausalOptions {
    pub depth_cap: usize,
    /// Cap on expanded derivation states.
    pub state_budget: usize,
    /// Largest adjustment set tried in one expansion step.
    pub max_adjustment: usize,
}

impl Default for CausalOptions {
    fn default() -> Self {
        CausalOptions {
            depth_cap: 12,
            state_budget: 20_000,
            max_adjustment: 3,
        }
    }
}

#[derive(Clone)]
struct State {
    expr: Estimand,
    depth: usize,
    steps: Vec<String>,
    justifications: Vec<Justification>,
}

struct Engine<'a> {
    g: &'a MGraph,
    dsep: DsepEngine,
    opts: CausalOptions,
}

impl Engine<'_> {
    fn unguarded(&self, a: &ProbAtom) -> Vec<String> {
        let guards = a.guards();
        a.targets
            .iter()
            .chain(&a.conditions)
            .filter(|t| {
                !t.var.proxy
                    && self.g.is_partial(&t.var.name)
                    && !guards.contains(&mechanism_name(&t.var.name))
            })
            .map(|t| t.var.name.clone())
            .collect()
    }

    fn terminal(&self, a: &ProbAtom) -> bool {
        a.do_vars.is_empty() && self.unguarded(a).is_empty()
    }

    fn heuristic(&self, e: &Estimand) -> usize {
        e.atoms()
            .iter()
            .map(|a| 2 * a.do_vars.len() + self.unguarded(a).len())
            .sum()
    }

    /// Replacement candidates for a non-terminal atom, each with a step
    /// description and its justifications.
    fn moves(
        &self,
        a: &ProbAtom,
        bound: &BTreeSet<String>,
    ) -> Vec<(Estimand, String, Vec<Justification>)> {
        let mut out = Vec::new();
        for t in &a.do_vars {
            let w: BTreeSet<String> = [t.var.name.clone()].into_iter().collect();
            for rule in [Rule::Two, Rule::Three] {
                if let Some(j) = rule_check(&self.dsep, rule, a, &w) {
                    let mut b = a.clone();
                    b.do_vars.retain(|d| d.var.name != t.var.name);
                    if rule == Rule::Two {
                        b.conditions.push(t.clone());
                    }
                    out.push((
                        Estimand::Atom(b),
                        format!("{rule} on {}", t.var.name),
                        vec![j],
                    ));
                }
            }
        }
        for v in self.unguarded(a) {
            let r = mechanism_name(&v);
            let w: BTreeSet<String> = [r.clone()].into_iter().collect();
            if let Some(j) = rule_check(&self.dsep, Rule::One, a, &w) {
                let mut b = a.clone();
                b.conditions.push(Term::fixed(&r, "0"));
                out.push((Estimand::Atom(b), format!("rule 1 inserts {r}=0"), vec![j]));
            }
        }
        if a.do_vars.is_empty() && a.targets.iter().all(|t| t.is_free() && !t.var.proxy) {
            let ctx = SeqContext {
                free: a
                    .conditions
                    .iter()
                    .filter(|t| t.is_free())
                    .map(|t| t.var.name.clone())
                    .collect(),
                fixed: a
                    .conditions
                    .iter()
                    .filter(|t| !t.is_free())
                    .cloned()
                    .collect(),
            };
            if a.conditions.iter().all(|t| !t.var.proxy) {
                let targets: Vec<String> = a.targets.iter().map(|t| t.var.name.clone()).collect();
                let (certs, _) = recover_block_sequential(
                    self.g,
                    &self.dsep,
                    &targets,
                    &ctx,
                    SearchOptions::default(),
                    1,
                );
                if let Some(c) = certs.into_iter().next() {
                    out.push((c.estimand, "sequential recovery".into(), c.justifications));
                }
            }
        }
        // Adjustment: P(y|do(x),c) = Σ_s P(y|do(x),s,c)·P(s|do(x),c).
        if a.targets.iter().all(|t| t.is_free()) {
            let used = a.names();
            let pool: Vec<String> = self
                .g
                .ids()
                .filter(|&v| {
                    matches!(
                        self.g.kind(v),
                        NodeKind::FullyObserved | NodeKind::PartiallyObserved
                    )
                })
                .map(|v| self.g.name(v).to_string())
                .filter(|v| !used.contains(v) && !bound.contains(v))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for s in subsets_by_size(&pool, self.opts.max_adjustment) {
                if s.is_empty() {
                    continue;
                }
                let mut first = a.clone();
                first.conditions.extend(s.iter().map(|v| Term::var(v)));
                let second = ProbAtom {
                    targets: s.iter().map(|v| Term::var(v)).collect(),
                    conditions: a.conditions.clone(),
                    do_vars: a.do_vars.clone(),
                };
                let e = Estimand::sum_over_all(
                    &s,
                    Estimand::Product(vec![Estimand::Atom(first), Estimand::Atom(second)]),
                );
                out.push((e, format!("adjust for {}", s.join(",")), Vec::new()));
            }
        }
        out
    }

    /// Successor expressions: rewrite the first non-terminal atom.
    fn successors(&self, e: &Estimand) -> Vec<(Estimand, String, Vec<Justification>)> {
        fn go(
            eng: &Engine<'_>,
            e: &Estimand,
            bound: &mut BTreeSet<String>,
        ) -> Option<Vec<(Estimand, String, Vec<Justification>)>> {
            match e {
                Estimand::Atom(a) => {
                    if eng.terminal(a) {
                        None
                    } else {
                        Some(eng.moves(a, bound))
                    }
                }
                Estimand::Product(fs) => {
                    for (i, f) in fs.iter().enumerate() {
                        if let Some(alts) = go(eng, f, bound) {
                            return Some(
                                alts.into_iter()
                                    .map(|(r, s, j)| {
                                        let mut v = fs.clone();
                                        v[i] = r;
                                        (Estimand::Product(v), s, j)
                                    })
                                    .collect(),
                            );
                        }
                    }
                    None
                }
                Estimand::SumOver(v, b) => {
                    bound.insert(v.clone());
                    let r = go(eng, b, bound).map(|alts| {
                        alts.into_iter()
                            .map(|(r, s, j)| (Estimand::sum_over(v, r), s, j))
                            .collect()
                    });
                    bound.remove(v);
                    r
                }
                Estimand::Quotient(a, b) | Estimand::Difference(a, b) => {
                    let quotient = matches!(e, Estimand::Quotient(..));
                    let rebuild = |x: Estimand, y: Estimand| {
                        if quotient {
                            Estimand::quotient(x, y)
                        } else {
                            Estimand::difference(x, y)
                        }
                    };
                    if let Some(alts) = go(eng, a, bound) {
                        return Some(
                            alts.into_iter()
                                .map(|(r, s, j)| (rebuild(r, (**b).clone()), s, j))
                                .collect(),
                        );
                    }
                    go(eng, b, bound).map(|alts| {
                        alts.into_iter()
                            .map(|(r, s, j)| (rebuild((**a).clone(), r), s, j))
                            .collect()
                    })
                }
            }
        }
        go(self, e, &mut BTreeSet::new()).unwrap_or_default()
    }
}

/// Derives a do-free, proxy-level estimand for `q`, or reports why the
/// bounded search gave up. Never claims non-identifiability.
pub fn recover_causal(
    g: &MGraph,
    q: &CausalQuery,
    opts: CausalOptions,
) -> Result<RecoveryOutcome, CausalError> {
    q.check(g)?;
    if !g.is_standard() {
        return Err(CausalError::ModelOutsideStandardClass);
    }
    let mut notes = Vec::new();
    if identify_by_adjustment(g, &q.do_vars, &q.outcome)?.is_none() {
        notes.push(
            "no back-door adjustment set in the substantive model; searching anyway".to_string(),
        );
    }
    let eng = Engine {
        g,
        dsep: DsepEngine::new(g),
        opts,
    };
    let start = State {
        expr: Estimand::Atom(q.atom()),
        depth: 0,
        steps: Vec::new(),
        justifications: Vec::new(),
    };
    let mut states = vec![start.clone()];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((eng.heuristic(&start.expr), 0usize, 0usize)));
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(start.expr.render());
    let mut expanded = 0usize;
    let mut hit_cap = false;

    while let Some(Reverse((_, _, idx))) = heap.pop() {
        let st = states[idx].clone();
        if st.expr.atoms().iter().all(|a| eng.terminal(a)) {
            let estimand = substitute_proxies(&st.expr, g).expect("terminal atoms are guarded");
            let mut cert =
                RecoveryCertificate::new(estimand, Method::DoCalculus, st.justifications);
            cert.notes = notes;
            cert.notes.extend(st.steps);
            return Ok(RecoveryOutcome::Recovered(cert));
        }
        if st.depth >= opts.depth_cap {
            hit_cap = true;
            continue;
        }
        expanded += 1;
        if expanded > opts.state_budget {
            return Ok(RecoveryOutcome::Unknown(format!(
                "derivation search budget of {} states exhausted",
                opts.state_budget
            )));
        }
        for (expr, step, js) in eng.successors(&st.expr) {
            if !seen.insert(expr.render()) {
                continue;
            }
            let mut next = State {
                expr,
                depth: st.depth + 1,
                steps: st.steps.clone(),
                justifications: st.justifications.clone(),
            };
            next.steps.push(step);
            next.justifications.extend(js);
            let f = next.depth + eng.heuristic(&next.expr);
            states.push(next);
            let id = states.len() - 1;
            heap.push(Reverse((f, id, id)));
        }
    }
    Ok(RecoveryOutcome::Unknown(if hit_cap {
        format!("derivation depth cap {} reached", opts.depth_cap)
    } else {
        "no derivation found".into()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn derived(g: &MGraph, y: &[&str], x: &[&str]) -> String {
        match recover_causal(g, &CausalQuery::new(y, x), CausalOptions::default()).unwrap() {
            RecoveryOutcome::Recovered(c) => {
                assert!(c.verify(g), "{:?}", c.justifications);
                c.estimand.render()
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eq10() {
        assert_eq!(
            derived(&catalog::confounded_outcome(), &["Y"], &["Z"]),
            "Σ_{W} P(W|R_Y=0)·P(Y*|W,Z,R_Y=0)"
        );
    }

    #[test]
    fn attrition_a() {
        assert_eq!(
            derived(
                &catalog::attrition_side_effects(),
                &["O_t1"],
                &["T_t", "T_t1"]
            ),
            "Σ_{S_t,S_t1} P(O_t1*|S_t,S_t1,T_t,T_t1,R_O_t1=0)·P(S_t,S_t1|T_t,T_t1)"
        );
    }

    #[test]
    fn attrition_b() {
        assert_eq!(
            derived(&catalog::attrition_dropout(), &["O_t1"], &["T_t", "T_t1"]),
            "Σ_{O_t} P(O_t*|T_t,T_t1,R_O_t=0)·P(O_t1*|O_t*,T_t,T_t1,R_O_t=0,R_O_t1=0)"
        );
    }

    #[test]
    fn rules_on_confounded_outcome() {
        let g = catalog::confounded_outcome();
        let a = ProbAtom::new(
            vec![Term::var("Y")],
            vec![Term::var("W"), Term::fixed("R_Y", "0")],
        )
        .with_do(vec![Term::var("Z")]);
        assert!(rule_applicable(&g, Rule::Two, &a, &s(&["Z"])).unwrap());
        assert_eq!(
            apply_rule(&g, Rule::Two, &a, &s(&["Z"]))
                .unwrap()
                .unwrap()
                .to_string(),
            "P(Y|W,Z,R_Y=0)"
        );
        let b = ProbAtom::new(vec![Term::var("W")], vec![Term::fixed("R_Y", "0")])
            .with_do(vec![Term::var("Z")]);
        assert_eq!(
            apply_rule(&g, Rule::Three, &b, &s(&["Z"]))
                .unwrap()
                .unwrap()
                .to_string(),
            "P(W|R_Y=0)"
        );
        assert!(rule_applicable(
            &g,
            Rule::Three,
            &ProbAtom::new(vec![Term::var("W")], vec![]),
            &[]
        )
        .unwrap());
        assert!(!rule_applicable(
            &g,
            Rule::Three,
            &ProbAtom::new(vec![Term::var("Y")], vec![]).with_do(vec![Term::var("Z")]),
            &s(&["Z"])
        )
        .unwrap());
    }

    #[test]
    fn adjustment_sets() {
        assert_eq!(
            identify_by_adjustment(&catalog::confounded_outcome(), &s(&["Z"]), &s(&["Y"])).unwrap(),
            Some(["W".to_string()].into_iter().collect())
        );
        assert_eq!(
            identify_by_adjustment(&catalog::confounded_pair(), &s(&["X"]), &s(&["Y"])).unwrap(),
            None
        );
        let g = MGraph::builder()
            .observed("X")
            .observed("Y")
            .edge("X", "Y")
            .build()
            .unwrap();
        assert_eq!(
            identify_by_adjustment(&g, &s(&["X"]), &s(&["Y"])).unwrap(),
            Some(BTreeSet::new())
        );
    }

    #[test]
    fn bow_arc_is_unknown_not_impossible() {
        let out = recover_causal(
            &catalog::confounded_pair(),
            &CausalQuery::new(&["Y"], &["X"]),
            CausalOptions {
                depth_cap: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(out, RecoveryOutcome::Unknown(_)));
    }
}
