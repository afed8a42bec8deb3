//! Symbolic expressions over the observed-data distribution `P(V*, V_o, R)`.
//!
//! Canonical text:
//!
//! ```text
//! expr   := "Σ_{" names "} " expr | diff
//! diff   := quot (" - " quot)*
//! quot   := prod (" / " prod)*
//! prod   := factor ("·" factor)*
//! factor := atom | "(" expr ")"
//! atom   := "P(" terms ("|" cond ("," cond)*)? ")"
//! cond   := "do(" terms ")" | term
//! term   := name ["*"] ["=" value]
//! ```
//!
//! Within an atom, free terms come first (sorted), then fixed ones (sorted).
//! Product factors are sorted by their rendered text and nested sums are
//! merged into one binder list.

mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{DsepEngine, SepQuery};
use crate::graph::{mechanism_name, MGraph};

pub use parse::{parse_estimand, ParseError};

/// A variable occurrence: either the variable itself or its proxy `X*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub proxy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub var: VarRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term {
            var: VarRef {
                name: name.to_string(),
                proxy: false,
            },
            value: None,
        }
    }

    pub fn proxy(name: &str) -> Term {
        Term {
            var: VarRef {
                name: name.to_string(),
                proxy: true,
            },
            value: None,
        }
    }

    pub fn fixed(name: &str, value: &str) -> Term {
        Term {
            var: VarRef {
                name: name.to_string(),
                proxy: false,
            },
            value: Some(value.to_string()),
        }
    }

    /// `R_X = 0` for the variable `X`.
    pub fn observed_guard(var: &str) -> Term {
        Term::fixed(&mechanism_name(var), "0")
    }

    pub fn is_free(&self) -> bool {
        self.value.is_none()
    }

    /// The column this term reads: `X*` for proxies, `X` otherwise.
    pub fn column(&self) -> String {
        if self.var.proxy {
            format!("{}*", self.var.name)
        } else {
            self.var.name.clone()
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.column())?;
        if let Some(v) = &self.value {
            write!(f, "={v}")?;
        }
        Ok(())
    }
}

/// `P(targets | do(do_vars), conditions)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProbAtom {
    pub targets: Vec<Term>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Term>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub do_vars: Vec<Term>,
}

fn sort_terms(terms: &mut [Term]) {
    terms.sort_by(|a, b| (!a.is_free(), &a.var, &a.value).cmp(&(!b.is_free(), &b.var, &b.value)));
}

impl ProbAtom {
    pub fn new(targets: Vec<Term>, conditions: Vec<Term>) -> ProbAtom {
        ProbAtom {
            targets,
            conditions,
            do_vars: Vec::new(),
        }
    }

    pub fn with_do(mut self, do_vars: Vec<Term>) -> ProbAtom {
        self.do_vars = do_vars;
        self
    }

    /// Base names of everything the atom mentions, do-variables included.
    pub fn names(&self) -> BTreeSet<String> {
        self.targets
            .iter()
            .chain(&self.conditions)
            .chain(&self.do_vars)
            .map(|t| t.var.name.clone())
            .collect()
    }

    /// Names that are fixed to `R_X = 0` anywhere in the atom.
    pub fn guards(&self) -> BTreeSet<String> {
        self.targets
            .iter()
            .chain(&self.conditions)
            .filter(|t| t.value.as_deref() == Some("0"))
            .map(|t| t.var.name.clone())
            .collect()
    }

    fn canonical(&self) -> ProbAtom {
        let mut a = self.clone();
        sort_terms(&mut a.targets);
        sort_terms(&mut a.conditions);
        sort_terms(&mut a.do_vars);
        a
    }

    pub fn validate(&self) -> Result<(), EstimandError> {
        if self.targets.is_empty() {
            return Err(EstimandError::EmptyTargets);
        }
        let mut seen = BTreeSet::new();
        for t in self
            .targets
            .iter()
            .chain(&self.conditions)
            .chain(&self.do_vars)
        {
            if !seen.insert(t.var.name.clone()) {
                return Err(EstimandError::RepeatedVariable(t.var.name.clone()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProbAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.canonical();
        let join = |ts: &[Term]| {
            ts.iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "P({}", join(&c.targets))?;
        let mut rest = Vec::new();
        if !c.do_vars.is_empty() {
            rest.push(format!("do({})", join(&c.do_vars)));
        }
        if !c.conditions.is_empty() {
            rest.push(join(&c.conditions));
        }
        if !rest.is_empty() {
            write!(f, "|{}", rest.join(","))?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    Atom(ProbAtom),
    Product(Vec<Estimand>),
    Quotient(Box<Estimand>, Box<Estimand>),
    SumOver(String, Box<Estimand>),
    Difference(Box<Estimand>, Box<Estimand>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimandError {
    #[error("atom {atom} mentions partially observed {var} without {var}'s R = 0 guard")]
    UnguardedPartialVariable { atom: String, var: String },
    #[error("probability atom with no targets")]
    EmptyTargets,
    #[error("variable {0} appears twice in one atom")]
    RepeatedVariable(String),
    #[error("summation binds {0}, which is not free in its body")]
    VacuousBinder(String),
    #[error("variable {0} is bound twice")]
    DoubleBinding(String),
}

impl Estimand {
    pub fn atom(targets: Vec<Term>, conditions: Vec<Term>) -> Estimand {
        Estimand::Atom(ProbAtom::new(targets, conditions))
    }

    pub fn product(factors: Vec<Estimand>) -> Estimand {
        if factors.len() == 1 {
            factors.into_iter().next().unwrap()
        } else {
            Estimand::Product(factors)
        }
    }

    pub fn quotient(num: Estimand, den: Estimand) -> Estimand {
        Estimand::Quotient(Box::new(num), Box::new(den))
    }

    pub fn sum_over(var: &str, body: Estimand) -> Estimand {
        Estimand::SumOver(var.to_string(), Box::new(body))
    }

    /// Sums over each of `vars` (outermost first).
    pub fn sum_over_all<S: AsRef<str>>(vars: &[S], body: Estimand) -> Estimand {
        vars.iter()
            .rev()
            .fold(body, |acc, v| Estimand::sum_over(v.as_ref(), acc))
    }

    pub fn difference(a: Estimand, b: Estimand) -> Estimand {
        Estimand::Difference(Box::new(a), Box::new(b))
    }

    /// Pre-order iteration over atoms.
    pub fn atoms(&self) -> Vec<&ProbAtom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a ProbAtom)) {
        match self {
            Estimand::Atom(a) => f(a),
            Estimand::Product(fs) => fs.iter().for_each(|e| e.visit_atoms(f)),
            Estimand::Quotient(a, b) | Estimand::Difference(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Estimand::SumOver(_, b) => b.visit_atoms(f),
        }
    }

    /// Rewrites every atom with `f`.
    pub fn map_atoms<E>(
        &self,
        f: &mut impl FnMut(&ProbAtom) -> Result<Estimand, E>,
    ) -> Result<Estimand, E> {
        Ok(match self {
            Estimand::Atom(a) => f(a)?,
            Estimand::Product(fs) => Estimand::Product(
                fs.iter()
                    .map(|e| e.map_atoms(f))
                    .collect::<Result<_, _>>()?,
            ),
            Estimand::Quotient(a, b) => Estimand::quotient(a.map_atoms(f)?, b.map_atoms(f)?),
            Estimand::Difference(a, b) => Estimand::difference(a.map_atoms(f)?, b.map_atoms(f)?),
            Estimand::SumOver(v, b) => Estimand::sum_over(v, b.map_atoms(f)?),
        })
    }

    /// Base names of free (unfixed, unbound) variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Estimand::Atom(a) => a
                .targets
                .iter()
                .chain(&a.conditions)
                .chain(&a.do_vars)
                .filter(|t| t.is_free())
                .map(|t| t.var.name.clone())
                .collect(),
            Estimand::Product(fs) => fs.iter().flat_map(|e| e.free_vars()).collect(),
            Estimand::Quotient(a, b) | Estimand::Difference(a, b) => {
                let mut s = a.free_vars();
                s.extend(b.free_vars());
                s
            }
            Estimand::SumOver(v, b) => {
                let mut s = b.free_vars();
                s.remove(v);
                s
            }
        }
    }

    /// Checks atom well-formedness and the binder invariants.
    pub fn validate(&self) -> Result<(), EstimandError> {
        fn go(e: &Estimand, bound: &mut Vec<String>) -> Result<(), EstimandError> {
            match e {
                Estimand::Atom(a) => a.validate(),
                Estimand::Product(fs) => fs.iter().try_for_each(|f| go(f, bound)),
                Estimand::Quotient(a, b) | Estimand::Difference(a, b) => {
                    go(a, bound)?;
                    go(b, bound)
                }
                Estimand::SumOver(v, b) => {
                    if bound.contains(v) {
                        return Err(EstimandError::DoubleBinding(v.clone()));
                    }
                    if !b.free_vars().contains(v) {
                        return Err(EstimandError::VacuousBinder(v.clone()));
                    }
                    bound.push(v.clone());
                    let r = go(b, bound);
                    bound.pop();
                    r
                }
            }
        }
        go(self, &mut Vec::new())
    }

    /// Canonical form: sorted term lists, flattened and sorted products,
    /// merged and sorted summation binders.
    pub fn canonical(&self) -> Estimand {
        match self {
            Estimand::Atom(a) => Estimand::Atom(a.canonical()),
            Estimand::Product(fs) => {
                let mut flat = Vec::new();
                for f in fs {
                    match f.canonical() {
                        Estimand::Product(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                if flat.len() == 1 {
                    return flat.pop().unwrap();
                }
                flat.sort_by_cached_key(|e| render_factor(e));
                Estimand::Product(flat)
            }
            Estimand::Quotient(a, b) => Estimand::quotient(a.canonical(), b.canonical()),
            Estimand::Difference(a, b) => Estimand::difference(a.canonical(), b.canonical()),
            Estimand::SumOver(..) => {
                let mut vars = Vec::new();
                let mut cur = self;
                while let Estimand::SumOver(v, b) = cur {
                    vars.push(v.clone());
                    cur = b;
                }
                vars.sort();
                Estimand::sum_over_all(&vars, cur.canonical())
            }
        }
    }

    pub fn render(&self) -> String {
        render_top(&self.canonical())
    }

    pub fn contains_do(&self) -> bool {
        self.atoms().iter().any(|a| !a.do_vars.is_empty())
    }
}

pub fn render(e: &Estimand) -> String {
    e.render()
}

/// Structural equality after canonicalization.
pub fn equal(a: &Estimand, b: &Estimand) -> bool {
    a.canonical() == b.canonical()
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn paren(s: String) -> String {
    format!("({s})")
}

fn render_top(e: &Estimand) -> String {
    match e {
        Estimand::Atom(a) => a.to_string(),
        Estimand::Product(fs) if fs.is_empty() => "1".to_string(),
        Estimand::Product(fs) => fs.iter().map(render_factor).collect::<Vec<_>>().join("·"),
        Estimand::Quotient(a, b) => {
            let num = match **a {
                Estimand::Difference(..) | Estimand::SumOver(..) => paren(render_top(a)),
                _ => render_top(a),
            };
            let den = match **b {
                Estimand::Atom(_) => render_top(b),
                _ => paren(render_top(b)),
            };
            format!("{num} / {den}")
        }
        Estimand::Difference(a, b) => {
            let l = match **a {
                Estimand::SumOver(..) => paren(render_top(a)),
                _ => render_top(a),
            };
            let r = match **b {
                Estimand::SumOver(..) | Estimand::Difference(..) => paren(render_top(b)),
                _ => render_top(b),
            };
            format!("{l} - {r}")
        }
        Estimand::SumOver(..) => {
            let mut vars = Vec::new();
            let mut cur = e;
            while let Estimand::SumOver(v, b) = cur {
                vars.push(v.as_str());
                cur = b;
            }
            format!("Σ_{{{}}} {}", vars.join(","), render_top(cur))
        }
    }
}

fn render_factor(e: &Estimand) -> String {
    match e {
        Estimand::Atom(_) => render_top(e),
        Estimand::Product(fs) if !fs.is_empty() => render_top(e),
        _ => paren(render_top(e)),
    }
}

/// Replaces every guarded partially observed variable `X` by its proxy
/// `X*`. Variables inside `do(..)` are left alone.
pub fn substitute_proxies(e: &Estimand, g: &MGraph) -> Result<Estimand, EstimandError> {
    e.map_atoms(&mut |a: &ProbAtom| {
        let guards = a.guards();
        let mut out = a.clone();
        for t in out.targets.iter_mut().chain(out.conditions.iter_mut()) {
            if t.var.proxy || !g.is_partial(&t.var.name) {
                continue;
            }
            if !guards.contains(&mechanism_name(&t.var.name)) {
                return Err(EstimandError::UnguardedPartialVariable {
                    atom: a.to_string(),
                    var: t.var.name.clone(),
                });
            }
            t.var.proxy = true;
        }
        Ok(Estimand::Atom(out))
    })
}

/// How a recovered estimand was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    SequentialFactorization,
    RFactorization,
    CompleteCase,
    AvailableCase,
    MarJoint,
    MatrixInversion,
    DoCalculus,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::SequentialFactorization => "SequentialFactorization",
            Method::RFactorization => "RFactorization",
            Method::CompleteCase => "CompleteCase",
            Method::AvailableCase => "AvailableCase",
            Method::MarJoint => "MarJoint",
            Method::MatrixInversion => "MatrixInversion",
            Method::DoCalculus => "DoCalculus",
        };
        f.write_str(s)
    }
}

/// An independence claim used in a derivation, with the graph surgery it is
/// read from (edges into `overline` and out of `underline` removed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Justification {
    pub claim: SepQuery,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub overline: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub underline: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Justification {
    pub fn plain(claim: SepQuery) -> Justification {
        Justification {
            claim,
            overline: BTreeSet::new(),
            underline: BTreeSet::new(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Justification {
        self.note = note.into();
        self
    }

    /// Replays the claim against `g`.
    pub fn verify(&self, g: &MGraph) -> bool {
        let e = DsepEngine::new(g);
        let e = if self.overline.is_empty() && self.underline.is_empty() {
            e
        } else {
            e.mutilated(&self.overline, &self.underline)
        };
        e.separated(&self.claim).unwrap_or(false)
    }
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.claim)?;
        let list = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        match (self.overline.is_empty(), self.underline.is_empty()) {
            (true, true) => {}
            (false, true) => write!(f, " in G[over {}]", list(&self.overline))?,
            (true, false) => write!(f, " in G[under {}]", list(&self.underline))?,
            (false, false) => write!(
                f,
                " in G[over {}; under {}]",
                list(&self.overline),
                list(&self.underline)
            )?,
        }
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryCertificate {
    pub estimand: Estimand,
    pub method: Method,
    pub justifications: Vec<Justification>,
    /// Remarks about the derivation, such as extensions beyond the textbook
    /// criteria.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RecoveryCertificate {
    pub fn new(estimand: Estimand, method: Method, justifications: Vec<Justification>) -> Self {
        RecoveryCertificate {
            estimand,
            method,
            justifications,
            notes: Vec::new(),
        }
    }

    /// True when every justification re-verifies on `g`.
    pub fn verify(&self, g: &MGraph) -> bool {
        self.justifications.iter().all(|j| j.verify(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn p(n: &str) -> Term {
        Term::proxy(n)
    }
    fn r0(n: &str) -> Term {
        Term::observed_guard(n)
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
    fn eq2_substitution() {
        let e = Estimand::product(vec![
            Estimand::atom(vec![v("G"), v("O")], vec![v("A"), r0("O")]),
            Estimand::atom(vec![v("A")], vec![]),
        ]);
        let s = substitute_proxies(&e, &obesity_mar()).unwrap();
        assert_eq!(s.render(), "P(A)·P(G,O*|A,R_O=0)");
        assert_eq!(substitute_proxies(&s, &obesity_mar()).unwrap(), s);
    }

    #[test]
    fn no_partial_variables_is_identity() {
        let e = Estimand::atom(vec![v("A")], vec![v("G")]);
        assert_eq!(substitute_proxies(&e, &obesity_mar()).unwrap(), e);
    }

    #[test]
    fn unguarded_partial() {
        let e = Estimand::atom(vec![v("O")], vec![v("A")]);
        assert!(matches!(
            substitute_proxies(&e, &obesity_mar()),
            Err(EstimandError::UnguardedPartialVariable { .. })
        ));
    }

    #[test]
    fn eq3_rendering() {
        let num = Estimand::product(vec![
            Estimand::atom(vec![p("Y"), p("X")], vec![r0("Y"), r0("X")]),
            Estimand::atom(vec![r0("Y"), r0("X")], vec![]),
        ]);
        let den = Estimand::product(vec![
            Estimand::atom(vec![r0("Y")], vec![p("X"), r0("X")]),
            Estimand::atom(vec![r0("X")], vec![r0("Y"), p("Y")]),
        ]);
        assert_eq!(
            Estimand::quotient(num, den).render(),
            "P(R_X=0,R_Y=0)·P(X*,Y*|R_X=0,R_Y=0) / (P(R_X=0|Y*,R_Y=0)·P(R_Y=0|X*,R_X=0))"
        );
    }

    #[test]
    fn commutativity_but_no_semantics() {
        let a = Estimand::atom(vec![v("A")], vec![]);
        let b = Estimand::atom(vec![v("B")], vec![]);
        assert!(equal(
            &Estimand::product(vec![a.clone(), b.clone()]),
            &Estimand::product(vec![b.clone(), a.clone()])
        ));
        assert!(!equal(
            &Estimand::product(vec![a, b]),
            &Estimand::atom(vec![v("A"), v("B")], vec![])
        ));
    }

    #[test]
    fn sums_merge_and_sort() {
        let body = Estimand::atom(vec![v("Y")], vec![v("B"), v("A")]);
        let e = Estimand::sum_over("B", Estimand::sum_over("A", body));
        assert_eq!(e.render(), "Σ_{A,B} P(Y|A,B)");
        assert_eq!(e.free_vars(), ["Y".to_string()].into_iter().collect());
        assert!(e.validate().is_ok());
        let bad = Estimand::sum_over("Q", Estimand::atom(vec![v("Y")], vec![]));
        assert_eq!(
            bad.validate(),
            Err(EstimandError::VacuousBinder("Q".into()))
        );
    }

    #[test]
    fn do_atoms_render() {
        let a = ProbAtom::new(vec![v("Y")], vec![v("W"), r0("Y")]).with_do(vec![v("Z")]);
        assert_eq!(a.to_string(), "P(Y|do(Z),W,R_Y=0)");
    }

    #[test]
    fn json_round_trip() {
        let e = Estimand::sum_over(
            "W",
            Estimand::product(vec![
                Estimand::atom(vec![p("Y")], vec![v("W"), v("Z"), r0("Y")]),
                Estimand::atom(vec![v("W")], vec![r0("Y")]),
            ]),
        );
        let text = serde_json::to_string(&e).unwrap();
        let back: Estimand = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
    }
}
