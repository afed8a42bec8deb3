//! Statistical recoverability: expressing a target distribution over
//! `V_o ∪ V_m` as a functional of the observed-data distribution.

mod matrix;
mod paths;
mod rfactor;
mod sequential;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{DsepEngine, SepQuery};
use crate::estimand::{
    parse_estimand, substitute_proxies, Estimand, Justification, Method, RecoveryCertificate, Term,
};
use crate::graph::{mechanism_name, MGraph, NodeKind};
use crate::taxonomy::{classify, MissingnessClass, TaxonomyError};

pub use matrix::{plan_matrix_recovery, MatrixRecoveryPlan};
pub use paths::Witness;
pub use rfactor::{certify_nonrecoverable, recover_joint_rfactor};
pub use sequential::{
    ordered_factorizations, recover_sequential, sequential_factorizations, Factor, Factorization,
};
pub(crate) use sequential::{recover_block_sequential, SeqContext};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Joint(Vec<String>),
    Conditional { y: Vec<String>, x: Vec<String> },
}

impl Query {
    pub fn joint<S: AsRef<str>>(vars: &[S]) -> Query {
        Query::Joint(vars.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn conditional<S: AsRef<str>, T: AsRef<str>>(y: &[S], x: &[T]) -> Query {
        Query::Conditional {
            y: y.iter().map(|s| s.as_ref().to_string()).collect(),
            x: x.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Parses `P(X,Y)` or `P(Y|X,Z)`.
    pub fn parse(text: &str) -> Result<Query, RecoveryError> {
        let bad = |m: &str| RecoveryError::BadQuery(format!("{text}: {m}"));
        let e = parse_estimand(text).map_err(|e| bad(&e.to_string()))?;
        let Estimand::Atom(a) = e else {
            return Err(bad("expected a single probability atom"));
        };
        if !a.do_vars.is_empty() {
            return Err(bad("do() belongs to causal queries"));
        }
        let names = |ts: &[Term]| -> Result<Vec<String>, RecoveryError> {
            ts.iter()
                .map(|t| {
                    if t.var.proxy || t.value.is_some() {
                        Err(bad("query terms must be plain variables"))
                    } else {
                        Ok(t.var.name.clone())
                    }
                })
                .collect()
        };
        let y = names(&a.targets)?;
        let x = names(&a.conditions)?;
        Ok(if x.is_empty() {
            Query::Joint(y)
        } else {
            Query::Conditional { y, x }
        })
    }

    pub fn targets(&self) -> &[String] {
        match self {
            Query::Joint(y) | Query::Conditional { y, .. } => y,
        }
    }

    pub fn context(&self) -> &[String] {
        match self {
            Query::Joint(_) => &[],
            Query::Conditional { x, .. } => x,
        }
    }

    /// The query as an unrecovered atom.
    pub fn atom(&self) -> Estimand {
        Estimand::atom(
            self.targets().iter().map(|v| Term::var(v)).collect(),
            self.context().iter().map(|v| Term::var(v)).collect(),
        )
    }

    fn check(&self, g: &MGraph) -> Result<(), RecoveryError> {
        if self.targets().is_empty() {
            return Err(RecoveryError::BadQuery("no target variables".into()));
        }
        let mut seen = BTreeSet::new();
        for v in self.targets().iter().chain(self.context()) {
            match g.kind_of(v) {
                None => return Err(RecoveryError::UnknownVariable(v.clone())),
                Some(NodeKind::FullyObserved | NodeKind::PartiallyObserved) => {}
                Some(_) => return Err(RecoveryError::NotSubstantive(v.clone())),
            }
            if !seen.insert(v) {
                return Err(RecoveryError::BadQuery(format!("{v} appears twice")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoveryError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("{0} is not a fully or partially observed variable")]
    NotSubstantive(String),
    #[error("bad query {0}")]
    BadQuery(String),
    #[error("graph is {0}, not MAR or MCAR")]
    NotMar(MissingnessClass),
    #[error("edges between mechanism nodes: {}", .0.join(", "))]
    REdgesPresent(Vec<String>),
    #[error("graph has no partially observed variables")]
    NoPartialVariables,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("matrix recovery does not apply: {0}")]
    PatternNotApplicable(String),
}

/// Why a query cannot be recovered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonRecoverability {
    pub witness: Witness,
    /// The query whose non-recoverability the witness establishes directly.
    pub sub_query: String,
    /// True when the witness is for one target of a multi-target query (the
    /// target's conditional given the rest); non-recoverability then carries
    /// over because the full query would determine that conditional.
    pub extension: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl fmt::Display for NonRecoverability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.witness, self.sub_query)?;
        if self.extension {
            write!(f, " [per-target extension]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryOutcome {
    Recovered(RecoveryCertificate),
    NonRecoverable(NonRecoverability),
    /// No implemented criterion applies. This never asserts impossibility.
    Unknown(String),
}

impl RecoveryOutcome {
    pub fn certificate(&self) -> Option<&RecoveryCertificate> {
        match self {
            RecoveryOutcome::Recovered(c) => Some(c),
            _ => None,
        }
    }

    pub fn estimand(&self) -> Option<&Estimand> {
        self.certificate().map(|c| &c.estimand)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RecoveryOutcome::Recovered(_) => "Recovered",
            RecoveryOutcome::NonRecoverable(_) => "NonRecoverable",
            RecoveryOutcome::Unknown(_) => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Cap on candidate factors examined by the sequential search.
    pub budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: 10_000 }
    }
}

fn set(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

fn partial_mechanisms<'a>(
    g: &MGraph,
    vars: impl IntoIterator<Item = &'a String>,
) -> BTreeSet<String> {
    vars.into_iter()
        .filter(|v| g.is_partial(v))
        .map(|v| mechanism_name(v))
        .collect()
}

/// Builds `P(y | x, R=0 guards)` with proxies substituted.
pub(crate) fn guarded_atom(
    g: &MGraph,
    y: &[String],
    x: &[String],
    mechanisms: &BTreeSet<String>,
) -> Estimand {
    let mut conds: Vec<Term> = x.iter().map(|v| Term::var(v)).collect();
    conds.extend(mechanisms.iter().map(|r| Term::fixed(r, "0")));
    let raw = Estimand::atom(y.iter().map(|v| Term::var(v)).collect(), conds);
    substitute_proxies(&raw, g).expect("every partial variable is guarded")
}

/// Complete-case recovery: `y ⊥ R | x` for all mechanisms `R`.
pub fn recoverable_complete_cases(
    g: &MGraph,
    y: &[String],
    x: &[String],
) -> Result<Option<Estimand>, RecoveryError> {
    Query::Conditional {
        y: y.to_vec(),
        x: x.to_vec(),
    }
    .check(g)?;
    let r: BTreeSet<String> = g.mechanisms().into_iter().collect();
    let ok = r.is_empty()
        || DsepEngine::new(g)
            .separated(&SepQuery {
                x: set(y),
                y: r.clone(),
                z: set(x),
            })
            .expect("checked names");
    Ok(ok.then(|| guarded_atom(g, y, x, &r)))
}

/// Available-case recovery: `y ⊥ (R_y, R_x) | x`.
pub fn recoverable_available_cases(
    g: &MGraph,
    y: &[String],
    x: &[String],
) -> Result<Option<Estimand>, RecoveryError> {
    Query::Conditional {
        y: y.to_vec(),
        x: x.to_vec(),
    }
    .check(g)?;
    let r = partial_mechanisms(g, y.iter().chain(x));
    let ok = r.is_empty()
        || DsepEngine::new(g)
            .separated(&SepQuery {
                x: set(y),
                y: r.clone(),
                z: set(x),
            })
            .expect("checked names");
    Ok(ok.then(|| guarded_atom(g, y, x, &r)))
}

/// Joint recovery under (v-)MAR, and the complete-case alternative under
/// MCAR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarJoint {
    pub estimand: Estimand,
    pub alternate: Option<Estimand>,
}

pub fn recover_mar_joint(g: &MGraph) -> Result<MarJoint, RecoveryError> {
    let class = classify(g)?;
    let vm = g.partial();
    let vo = g.observed();
    match class {
        MissingnessClass::Mar | MissingnessClass::Mcar => {}
        MissingnessClass::NoMissingness => return Err(RecoveryError::NoPartialVariables),
        MissingnessClass::Mnar => return Err(RecoveryError::NotMar(class)),
    }
    let r: BTreeSet<String> = g.mechanisms().into_iter().collect();
    let mut factors = vec![guarded_atom(g, &vm, &vo, &r)];
    if !vo.is_empty() {
        factors.push(guarded_atom(g, &vo, &[], &BTreeSet::new()));
    }
    let alternate = (class == MissingnessClass::Mcar).then(|| {
        let all: Vec<String> = vm.iter().chain(&vo).cloned().collect();
        guarded_atom(g, &all, &[], &r)
    });
    Ok(MarJoint {
        estimand: Estimand::product(factors),
        alternate,
    })
}

/// Tries every implemented criterion in turn: sequential factorization,
/// R-factorization of the joint, then the non-recoverability certificate.
pub fn recover(
    g: &MGraph,
    q: &Query,
    opts: SearchOptions,
) -> Result<RecoveryOutcome, RecoveryError> {
    q.check(g)?;
    let mut notes = Vec::new();
    match recover_sequential(g, q, opts)? {
        out @ RecoveryOutcome::Recovered(_) => return Ok(out),
        RecoveryOutcome::Unknown(reason) => notes.push(reason),
        RecoveryOutcome::NonRecoverable(_) => unreachable!("sequential search never certifies"),
    }
    if !g.partial().is_empty() {
        match recover_joint_rfactor(g) {
            Ok(RecoveryOutcome::Recovered(cert)) => {
                let joint: BTreeSet<String> = g.partial().into_iter().chain(g.observed()).collect();
                return Ok(RecoveryOutcome::Recovered(rfactor::restrict_to_query(
                    cert, &joint, q,
                )));
            }
            Ok(RecoveryOutcome::Unknown(reason)) => notes.push(reason),
            Ok(RecoveryOutcome::NonRecoverable(_)) => {
                notes.push("joint is not recoverable by R-factorization".into())
            }
            Err(e) => notes.push(format!("R-factorization not applicable: {e}")),
        }
    }
    if let Some(mut nr) = certify_nonrecoverable(g, q.targets(), q.context())? {
        if let Ok(plan) = plan_matrix_recovery(g, q) {
            nr.notes.push(format!(
                "if P({}|{}) is invertible as a matrix, {} can be recovered by matrix inversion",
                plan.driver, plan.target, q
            ));
        }
        return Ok(RecoveryOutcome::NonRecoverable(nr));
    }
    Ok(RecoveryOutcome::Unknown(notes.join("; ")))
}

pub(crate) fn sep_justification(
    x: &BTreeSet<String>,
    y: &BTreeSet<String>,
    z: &BTreeSet<String>,
) -> Justification {
    Justification::plain(SepQuery {
        x: x.clone(),
        y: y.clone(),
        z: z.clone(),
    })
}

pub(crate) fn certificate(
    estimand: Estimand,
    method: Method,
    justifications: Vec<Justification>,
) -> RecoveryCertificate {
    RecoveryCertificate::new(estimand, method, justifications)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn complete_and_available_cases() {
        let g = catalog::crossed_masks();
        let cc = recoverable_complete_cases(&g, &s(&["Y"]), &s(&["X", "Z1", "Z2"]))
            .unwrap()
            .unwrap();
        assert_eq!(cc.render(), "P(Y*|X*,Z1*,Z2*,R_X=0,R_Y=0,R_Z1=0,R_Z2=0)");
        assert_eq!(
            recoverable_complete_cases(&g, &s(&["Z1"]), &[]).unwrap(),
            None
        );
        let ac = recoverable_available_cases(&g, &s(&["Z1"]), &[])
            .unwrap()
            .unwrap();
        assert_eq!(ac.render(), "P(Z1*|R_Z1=0)");
        let sm = catalog::selfmask();
        assert_eq!(
            recoverable_available_cases(&sm, &s(&["I"]), &[]).unwrap(),
            None
        );
        let obs = catalog::confounded_pair();
        assert_eq!(
            recoverable_available_cases(&obs, &s(&["Y"]), &s(&["X"]))
                .unwrap()
                .unwrap()
                .render(),
            "P(Y|X)"
        );
    }

    #[test]
    fn mar_joint() {
        let m = recover_mar_joint(&catalog::obesity_mar()).unwrap();
        assert_eq!(m.estimand.render(), "P(A,G)·P(O*|A,G,R_O=0)");
        assert!(m.alternate.is_none());
        let b = recover_mar_joint(&catalog::obesity_mcar()).unwrap();
        assert_eq!(b.alternate.unwrap().render(), "P(A,G,O*|R_O=0)");
        assert_eq!(
            recover_mar_joint(&catalog::obesity_mnar()),
            Err(RecoveryError::NotMar(MissingnessClass::Mnar))
        );
    }

    #[test]
    fn query_parsing() {
        assert_eq!(Query::parse("P(X,Y)").unwrap(), Query::joint(&["X", "Y"]));
        assert_eq!(
            Query::parse("P(Y|X,Z)").unwrap(),
            Query::conditional(&["Y"], &["X", "Z"])
        );
        assert!(Query::parse("P(Y*)").is_err());
        assert!(Query::parse("P(Y|do(X))").is_err());
    }

    #[test]
    fn top_level_dispatch() {
        let out = recover(
            &catalog::pair_crossed(),
            &Query::joint(&["X", "Y"]),
            SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(out.certificate().unwrap().method, Method::RFactorization);
        let out = recover(
            &catalog::selfmask(),
            &Query::joint(&["I"]),
            SearchOptions::default(),
        )
        .unwrap();
        assert!(matches!(out, RecoveryOutcome::NonRecoverable(_)));
        let out = recover(
            &catalog::matrix(),
            &Query::joint(&["I"]),
            SearchOptions::default(),
        )
        .unwrap();
        let RecoveryOutcome::NonRecoverable(nr) = out else {
            panic!()
        };
        assert_eq!(nr.notes.len(), 1);
        assert!(matches!(
            recover(
                &catalog::obesity_mar(),
                &Query::joint(&["R_O"]),
                SearchOptions::default()
            ),
            Err(RecoveryError::NotSubstantive(_))
        ));
    }
}
