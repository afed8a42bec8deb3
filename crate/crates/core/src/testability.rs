//! Which independences of an m-graph data can refute, and the proxy-level
//! equations that test them.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{DsepEngine, DsepError, SepOptions, SepQuery};
use crate::estimand::{Estimand, Term};
use crate::estimation::{CiSpec, ObservedDistribution, Table};
use crate::graph::{mechanism_name, MGraph, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestabilityError {
    #[error("no partially observed variables")]
    NoPartialVariables,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{0} is fully observed and cannot also be partially observed")]
    Overlap(String),
    #[error(transparent)]
    Dsep(#[from] DsepError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Read off the graph at a pair of non-adjacent nodes.
    MissingEdge(String, String),
    /// Implied by assuming a missingness class.
    Assumption(String),
}

/// An asserted independence `x ⊥ y | z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub query: SepQuery,
    pub origin: Origin,
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join =
            |s: &BTreeSet<String>| s.iter().map(String::as_str).collect::<Vec<_>>().join(",");
        write!(f, "{} ⊥ {}", join(&self.query.x), join(&self.query.y))?;
        if !self.query.z.is_empty() {
            write!(f, " | {}", join(&self.query.z))?;
        }
        Ok(())
    }
}

/// The syntactic shape of a testable claim: both sides substantive, one
/// side a mechanism, or both sides mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    VarVar,
    VarMechanism,
    MechanismMechanism,
}

impl Form {
    pub fn number(self) -> u8 {
        match self {
            Form::VarVar => 1,
            Form::VarMechanism => 2,
            Form::MechanismMechanism => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Testable(Form),
    Untestable,
    Unknown,
}

/// Two observed-data expressions that agree whenever the claim holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEquation {
    pub left: Estimand,
    pub right: Estimand,
    pub ci: CiSpec,
}

impl fmt::Display for TestEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.left.render(), self.right.render())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implication {
    pub claim: Claim,
    pub status: Status,
    pub equation: Option<TestEquation>,
}

/// Matches `X ⊥ R_X | Z, W, R_Z` with `X, Z` partially observed and `W`
/// fully observed, in either orientation.
pub fn is_untestable(g: &MGraph, c: &Claim) -> bool {
    let q = &c.query;
    oriented_untestable(g, &q.x, &q.y, &q.z) || oriented_untestable(g, &q.y, &q.x, &q.z)
}

fn oriented_untestable(
    g: &MGraph,
    x: &BTreeSet<String>,
    r: &BTreeSet<String>,
    z: &BTreeSet<String>,
) -> bool {
    if x.is_empty() || !x.iter().all(|v| g.is_partial(v)) {
        return false;
    }
    let rx: BTreeSet<String> = x.iter().map(|v| mechanism_name(v)).collect();
    if &rx != r {
        return false;
    }
    let partial: BTreeSet<String> = z.iter().filter(|v| g.is_partial(v)).cloned().collect();
    let mechanisms: BTreeSet<String> = z.iter().filter(|v| g.is_mechanism(v)).cloned().collect();
    let want: BTreeSet<String> = partial.iter().map(|v| mechanism_name(v)).collect();
    partial.is_disjoint(x)
        && mechanisms == want
        && z.iter()
            .all(|v| g.is_partial(v) || g.is_observed(v) || g.is_mechanism(v))
}

/// Mechanisms of the partially observed variables in the claim that are
/// not already conditioned on, or `None` if one of them is a side of the
/// claim.
fn missing_guards(g: &MGraph, q: &SepQuery) -> Option<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for v in q.x.iter().chain(&q.y).chain(&q.z) {
        if g.is_partial(v) {
            let r = mechanism_name(v);
            if q.x.contains(&r) || q.y.contains(&r) {
                return None;
            }
            if !q.z.contains(&r) {
                out.insert(r);
            }
        }
    }
    Some(out)
}

fn form_of(g: &MGraph, q: &SepQuery) -> Form {
    let mx = q.x.iter().all(|v| g.is_mechanism(v));
    let my = q.y.iter().all(|v| g.is_mechanism(v));
    match (mx, my) {
        (false, false) => Form::VarVar,
        (true, true) => Form::MechanismMechanism,
        _ => Form::VarMechanism,
    }
}

/// Observed-data term for a node in a claim whose guards are all present.
fn term(g: &MGraph, v: &str, guards: &BTreeSet<String>) -> Term {
    if g.is_partial(v) {
        Term::proxy(v)
    } else if guards.contains(v) {
        Term::fixed(v, "0")
    } else {
        Term::var(v)
    }
}

/// Guards: mechanisms in `z` that belong to partially observed variables
/// of the claim. They are fixed at 0; other conditioning nodes stay free.
fn split(g: &MGraph, q: &SepQuery) -> (Vec<Term>, Vec<Term>, Vec<Term>, BTreeSet<String>) {
    let guards: BTreeSet<String> =
        q.x.iter()
            .chain(&q.y)
            .chain(&q.z)
            .filter(|v| g.is_partial(v))
            .map(|v| mechanism_name(v))
            .filter(|r| q.z.contains(r))
            .collect();
    let xs = q.x.iter().map(|v| term(g, v, &guards)).collect();
    let ys = q.y.iter().map(|v| term(g, v, &guards)).collect();
    let zs = q.z.iter().map(|v| term(g, v, &guards)).collect();
    (xs, ys, zs, guards)
}

fn ci_spec(x: &[Term], y: &[Term], z: &[Term]) -> CiSpec {
    let cols = |ts: &[Term]| {
        ts.iter()
            .filter(|t| t.is_free())
            .map(Term::column)
            .collect()
    };
    CiSpec {
        x: cols(x),
        y: cols(y),
        given: cols(z),
        fixed: z
            .iter()
            .filter(|t| !t.is_free())
            .map(|t| (t.column(), t.value.clone().unwrap()))
            .collect(),
    }
}

/// `P(x | z) = P(x | y, z)` over proxies, guards fixed at 0.
pub fn conditional_equation(g: &MGraph, q: &SepQuery) -> TestEquation {
    let (x, y, z, _) = split(g, q);
    let mut with_y = z.clone();
    with_y.extend(y.iter().cloned());
    TestEquation {
        left: Estimand::atom(x.clone(), z.clone()).canonical(),
        right: Estimand::atom(x.clone(), with_y).canonical(),
        ci: ci_spec(&x, &y, &z),
    }
}

/// `P(x, y | z) = P(x | z)·P(y | z)` over proxies, guards fixed at 0.
pub fn factorized_equation(g: &MGraph, q: &SepQuery) -> TestEquation {
    let (x, y, z, _) = split(g, q);
    let mut both = x.clone();
    both.extend(y.iter().cloned());
    TestEquation {
        left: Estimand::atom(both, z.clone()).canonical(),
        right: Estimand::product(vec![
            Estimand::atom(x.clone(), z.clone()),
            Estimand::atom(y.clone(), z.clone()),
        ])
        .canonical(),
        ci: ci_spec(&x, &y, &z),
    }
}

/// Puts the substantive side first and otherwise orders sides by name.
fn orient(g: &MGraph, a: &str, b: &str, z: BTreeSet<String>) -> SepQuery {
    let key = |v: &str| (g.is_mechanism(v), v.to_string());
    if key(a) <= key(b) {
        SepQuery::new([a], [b], z)
    } else {
        SepQuery::new([b], [a], z)
    }
}

fn classify_claim(
    g: &MGraph,
    engine: &DsepEngine,
    q: SepQuery,
) -> Result<(SepQuery, Status), DsepError> {
    let Some(extra) = missing_guards(g, &q) else {
        let status = if is_untestable(
            g,
            &Claim {
                query: q.clone(),
                origin: Origin::Assumption(String::new()),
            },
        ) {
            Status::Untestable
        } else {
            Status::Unknown
        };
        return Ok((q, status));
    };
    if extra.is_empty() {
        let f = form_of(g, &q);
        return Ok((q, Status::Testable(f)));
    }
    let mut aug = q.clone();
    aug.z.extend(extra);
    if engine.separated(&aug)? {
        let f = form_of(g, &aug);
        return Ok((aug, Status::Testable(f)));
    }
    let probe = Claim {
        query: q.clone(),
        origin: Origin::Assumption(String::new()),
    };
    Ok((
        q,
        if is_untestable(g, &probe) {
            Status::Untestable
        } else {
            Status::Unknown
        },
    ))
}

/// Separating sets tried for a missing edge: the minimal separator, the
/// minimal one that already holds the sides' guards, and each side's
/// parent set.
fn candidate_separators(
    g: &MGraph,
    engine: &DsepEngine,
    a: &str,
    b: &str,
) -> Result<Vec<BTreeSet<String>>, DsepError> {
    let x = BTreeSet::from([a.to_string()]);
    let y = BTreeSet::from([b.to_string()]);
    let none = BTreeSet::new();
    let opts = SepOptions::default();
    let mut out = Vec::new();
    if let Some(z) = engine.minimal_separator(&x, &y, &none, &none, opts)? {
        out.push(z);
    }
    let guards: BTreeSet<String> = [a, b]
        .iter()
        .filter(|v| g.is_partial(v))
        .map(|v| mechanism_name(v))
        .filter(|r| r != a && r != b)
        .collect();
    if !guards.is_empty() {
        if let Some(z) = engine.minimal_separator(&x, &y, &guards, &none, opts)? {
            out.push(z);
        }
    }
    for (v, other) in [(a, b), (b, a)] {
        let id = g.id(v).unwrap();
        let pa: BTreeSet<String> = g
            .parents(id)
            .iter()
            .map(|&p| g.name(p).to_string())
            .filter(|p| p != other)
            .collect();
        let observable = pa
            .iter()
            .all(|p| g.kind_of(p).is_some_and(|k| k != NodeKind::Latent));
        let latent_free = g.spouses(id).is_empty();
        if observable && latent_free && engine.separated(&SepQuery::new([a], [b], pa.iter()))? {
            out.push(pa);
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|z| seen.insert(z.clone()));
    Ok(out)
}

fn pair_implications(
    g: &MGraph,
    engine: &DsepEngine,
    a: &str,
    b: &str,
) -> Result<Vec<Implication>, DsepError> {
    let origin = Origin::MissingEdge(a.to_string(), b.to_string());
    let mut testable = Vec::new();
    let mut other = Vec::new();
    for z in candidate_separators(g, engine, a, b)? {
        let (q, status) = classify_claim(g, engine, orient(g, a, b, z))?;
        let claim = Claim {
            query: q.clone(),
            origin: origin.clone(),
        };
        match status {
            Status::Testable(_) => testable.push(Implication {
                claim,
                status,
                equation: Some(conditional_equation(g, &q)),
            }),
            _ => other.push(Implication {
                claim,
                status,
                equation: None,
            }),
        }
    }
    // One testable claim per missing edge is enough; otherwise report what
    // was found.
    if let Some(first) = testable.into_iter().next() {
        return Ok(vec![first]);
    }
    Ok(other)
}

/// Claims read off every missing edge between observable nodes (fully or
/// partially observed variables and mechanisms), with their status.
pub fn implications(g: &MGraph) -> Result<Vec<Implication>, TestabilityError> {
    let engine = DsepEngine::new(g);
    let nodes: Vec<String> = g
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
    let mut pairs = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if !g.adjacent(g.id(a).unwrap(), g.id(b).unwrap()) {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    let found: Vec<Vec<Implication>> = pairs
        .par_iter()
        .map(|(a, b)| pair_implications(g, &engine, a, b))
        .collect::<Result<_, _>>()?;
    let mut out: Vec<Implication> = Vec::new();
    for imp in found.into_iter().flatten() {
        if !out.iter().any(|o| o.claim.query == imp.claim.query) {
            out.push(imp);
        }
    }
    Ok(out)
}

/// The testable claims of [`implications`] with their equations.
pub fn testable_implications(g: &MGraph) -> Result<Vec<(Claim, TestEquation)>, TestabilityError> {
    Ok(implications(g)?
        .into_iter()
        .filter_map(|i| i.equation.map(|e| (i.claim, e)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTest {
    pub claim: Claim,
    pub form: Form,
    pub equation: TestEquation,
    /// What to change in the model if the test rejects.
    pub hint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub tests: Vec<SuiteTest>,
    /// Set when the assumption has no testable consequence.
    pub notice: Option<String>,
}

fn check_sets(v_m: &[String], v_o: &[String]) -> Result<MGraph, TestabilityError> {
    if v_m.is_empty() {
        return Err(TestabilityError::NoPartialVariables);
    }
    if let Some(v) = v_m.iter().find(|v| v_o.contains(v)) {
        return Err(TestabilityError::Overlap(v.clone()));
    }
    let mut b = MGraph::builder();
    for v in v_o {
        b = b.observed(v);
    }
    for v in v_m {
        b = b.partial(v);
    }
    b.build()
        .map_err(|e| TestabilityError::UnknownNode(e.to_string()))
}

fn hint(a: &str, b: &str) -> String {
    format!("consider adding an edge between {a} and {b}")
}

/// `A ⊥ R_B | V_o, R_A` for each ordered pair of distinct partially
/// observed variables.
pub fn mar_test_suite<S: AsRef<str>, T: AsRef<str>>(
    v_m: &[S],
    v_o: &[T],
) -> Result<Suite, TestabilityError> {
    let v_m: Vec<String> = v_m.iter().map(|s| s.as_ref().to_string()).collect();
    let v_o: Vec<String> = v_o.iter().map(|s| s.as_ref().to_string()).collect();
    let g = check_sets(&v_m, &v_o)?;
    let mut tests = Vec::new();
    for a in &v_m {
        for b in &v_m {
            if a == b {
                continue;
            }
            let rb = mechanism_name(b);
            let mut z: BTreeSet<String> = v_o.iter().cloned().collect();
            z.insert(mechanism_name(a));
            let q = SepQuery::new([a.as_str()], [rb.as_str()], z);
            tests.push(SuiteTest {
                equation: factorized_equation(&g, &q),
                claim: Claim {
                    query: q,
                    origin: Origin::Assumption("MAR".into()),
                },
                form: Form::VarMechanism,
                hint: hint(a, &rb),
            });
        }
    }
    let notice = (v_m.len() == 1)
        .then(|| "MAR is untestable with a single partially observed variable".to_string());
    Ok(Suite { tests, notice })
}

/// The MAR suite plus `C ⊥ R_A` for each fully observed `C` and each
/// mechanism `R_A`.
pub fn mcar_test_suite<S: AsRef<str>, T: AsRef<str>>(
    v_m: &[S],
    v_o: &[T],
) -> Result<Suite, TestabilityError> {
    let mut suite = mar_test_suite(v_m, v_o)?;
    let v_m: Vec<String> = v_m.iter().map(|s| s.as_ref().to_string()).collect();
    let v_o: Vec<String> = v_o.iter().map(|s| s.as_ref().to_string()).collect();
    let g = check_sets(&v_m, &v_o)?;
    for c in &v_o {
        for a in &v_m {
            let ra = mechanism_name(a);
            let q = SepQuery::new([c.as_str()], [ra.as_str()], Vec::<String>::new());
            suite.tests.push(SuiteTest {
                equation: factorized_equation(&g, &q),
                claim: Claim {
                    query: q,
                    origin: Origin::Assumption("MCAR".into()),
                },
                form: Form::VarMechanism,
                hint: hint(c, &ra),
            });
        }
    }
    suite.notice = (v_m.len() + v_o.len() < 2)
        .then(|| "MCAR is untestable with a single variable".to_string());
    Ok(suite)
}

/// A distribution over `w`, `x` and `R_x` that agrees with the observed
/// data and satisfies `x ⊥ R_x | w`: `P(x*|w, R_x=0)·P(R_x, w)`.
pub fn compatible_distribution<S: AsRef<str>>(
    p: &ObservedDistribution,
    x: &str,
    w: &[S],
) -> Option<Table> {
    let r = mechanism_name(x);
    let proxy = format!("{x}*");
    let w: Vec<String> = w.iter().map(|s| s.as_ref().to_string()).collect();
    let mut given = w.clone();
    given.push(r.clone());
    let cond = p.table.conditional(&[proxy.as_str()], &given)?;
    let mut keep = w.clone();
    keep.push(r.clone());
    let marg = p.table.marginal(&keep)?;
    let xd = p.base_domain(x)?;
    let mut vars = w.clone();
    vars.push(x.to_string());
    vars.push(r.clone());
    let mut domains: Vec<Vec<String>> = w
        .iter()
        .map(|v| p.table.domain(v).map(<[String]>::to_vec))
        .collect::<Option<_>>()?;
    domains.push(xd.clone());
    domains.push(p.table.domain(&r)?.to_vec());
    let mut out = Table::zeros(vars.clone(), domains.clone());
    for idx in 0..out.len() {
        let a = out.assignment(idx);
        let mut cell: Vec<(&str, &str)> = w
            .iter()
            .zip(&a)
            .zip(&domains)
            .map(|((v, &i), d)| (v.as_str(), d[i].as_str()))
            .collect();
        let rv = domains[w.len() + 1][a[w.len() + 1]].as_str();
        let mass = {
            let mut c = cell.clone();
            c.push((r.as_str(), rv));
            marg.get(&c)?
        };
        cell.push((r.as_str(), "0"));
        cell.push((proxy.as_str(), xd[a[w.len()]].as_str()));
        out.probs_mut()[idx] = cond.get(&cell)? * mass;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn claim(x: &str, y: &str, z: &[&str]) -> Claim {
        Claim {
            query: SepQuery::new([x], [y], z.iter()),
            origin: Origin::Assumption(String::new()),
        }
    }

    #[test]
    fn untestable_schema() {
        let g = catalog::selfmask();
        assert!(is_untestable(&g, &claim("I", "R_I", &[])));
        let g = catalog::mediator_mask();
        assert!(is_untestable(&g, &claim("Z", "R_Z", &["X", "Y"])));
        assert!(is_untestable(&g, &claim("R_Z", "Z", &["Y"])));
        assert!(!is_untestable(&g, &claim("X", "R_Z", &["Y"])));
        assert!(!is_untestable(&g, &claim("X", "Y", &[])));
    }

    #[test]
    fn six_d() {
        let g = catalog::mediator_mask();
        let all = implications(&g).unwrap();
        let testable = testable_implications(&g).unwrap();
        let texts: Vec<String> = testable.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(texts, ["X ⊥ R_Z | Y"]);
        assert_eq!(testable[0].1.to_string(), "P(X|Y) = P(X|R_Z,Y)");
        let zr = all
            .iter()
            .find(|i| i.claim.to_string() == "Z ⊥ R_Z | X,Y")
            .unwrap();
        assert_eq!(zr.status, Status::Untestable);
        assert!(all.iter().all(|i| i.status != Status::Unknown));
    }

    #[test]
    fn fully_observed_chain() {
        let g = MGraph::builder()
            .observed("A")
            .observed("B")
            .observed("C")
            .edge("A", "B")
            .edge("B", "C")
            .build()
            .unwrap();
        let t = testable_implications(&g).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].0.to_string(), "A ⊥ C | B");
        assert_eq!(t[0].1.to_string(), "P(A|B) = P(A|B,C)");
    }

    #[test]
    fn complete_graph_has_none() {
        let g = MGraph::builder()
            .observed("A")
            .observed("B")
            .edge("A", "B")
            .build()
            .unwrap();
        assert!(implications(&g).unwrap().is_empty());
    }

    #[test]
    fn guards_are_added() {
        // X ⊥ Y holds, and X ⊥ Y | R_X, R_Y too, so the claim is testable.
        let g = MGraph::builder().partial("X").partial("Y").build().unwrap();
        let t = testable_implications(&g).unwrap();
        let xy = t
            .iter()
            .find(|(c, _)| c.query.x.contains("X") && c.query.y.contains("Y"))
            .unwrap();
        assert_eq!(xy.0.to_string(), "X ⊥ Y | R_X,R_Y");
        assert_eq!(xy.1.to_string(), "P(X*|R_X=0,R_Y=0) = P(X*|Y*,R_X=0,R_Y=0)");
    }

    #[test]
    fn mar_suite() {
        let s = mar_test_suite(&["A", "B"], &["C"]).unwrap();
        let eqs: Vec<String> = s.tests.iter().map(|t| t.equation.to_string()).collect();
        assert_eq!(
            eqs,
            [
                "P(A*,R_B|C,R_A=0) = P(A*|C,R_A=0)·P(R_B|C,R_A=0)",
                "P(B*,R_A|C,R_B=0) = P(B*|C,R_B=0)·P(R_A|C,R_B=0)",
            ]
        );
        assert_eq!(s.tests[0].hint, "consider adding an edge between A and R_B");
        assert!(s.notice.is_none());
        assert_eq!(
            s.tests[0].equation.ci.fixed,
            [("R_A".to_string(), "0".to_string())]
        );

        let single = mar_test_suite(&["A"], &["C"]).unwrap();
        assert!(single.tests.is_empty() && single.notice.is_some());
        assert_eq!(
            mar_test_suite(&["A", "B", "C"], &[] as &[&str])
                .unwrap()
                .tests
                .len(),
            6
        );
        assert_eq!(
            mar_test_suite(&[] as &[&str], &["C"]),
            Err(TestabilityError::NoPartialVariables)
        );
    }

    #[test]
    fn mcar_suite() {
        let s = mcar_test_suite(&["A", "B"], &["C"]).unwrap();
        let eqs: Vec<String> = s.tests.iter().map(|t| t.equation.to_string()).collect();
        assert!(eqs.contains(&"P(C,R_A) = P(C)·P(R_A)".to_string()));
        assert_eq!(eqs.len(), 4);
        let single = mcar_test_suite(&["A"], &[] as &[&str]).unwrap();
        assert!(single.tests.is_empty() && single.notice.is_some());
    }
}
