//! MCAR / MAR / MNAR classification of m-graphs.
//!
//! The MAR reported here is the variable-level notion: `V_m ∪ U ⊥ R | V_o`.
//! It is not Rubin's event-level MAR, which is why machine-readable output
//! labels it `v-MAR`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsep::{DsepEngine, SepQuery};
use crate::graph::{MGraph, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissingnessClass {
    #[serde(rename = "MCAR")]
    Mcar,
    #[serde(rename = "v-MAR")]
    Mar,
    #[serde(rename = "MNAR")]
    Mnar,
    #[serde(rename = "NONE")]
    NoMissingness,
}

impl MissingnessClass {
    pub fn label(self) -> &'static str {
        match self {
            MissingnessClass::Mcar => "MCAR",
            MissingnessClass::Mar => "MAR",
            MissingnessClass::Mnar => "MNAR",
            MissingnessClass::NoMissingness => "NONE",
        }
    }
}

impl fmt::Display for MissingnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("not a standard m-graph: mechanism nodes have substantive children ({})", fmt_pairs(.0))]
    ModelOutsideStandardClass(Vec<(String, String)>),
}

fn fmt_pairs(p: &[(String, String)]) -> String {
    p.iter()
        .map(|(a, b)| format!("{a} -> {b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Classification plus the edges that rule out MAR or MCAR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: MissingnessClass,
    /// For MNAR, the edges that violate MAR; for MAR, the edges that
    /// violate MCAR. Empty otherwise.
    pub witnesses: Vec<String>,
}

fn standard(g: &MGraph) -> Result<(), TaxonomyError> {
    let v = g.mechanism_child_violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(TaxonomyError::ModelOutsideStandardClass(v))
    }
}

/// Classification via two d-separation queries on the latent-expanded graph.
pub fn classify_by_dsep(g: &MGraph) -> Result<MissingnessClass, TaxonomyError> {
    standard(g)?;
    if g.partial().is_empty() {
        return Ok(MissingnessClass::NoMissingness);
    }
    let engine = DsepEngine::new(g);
    let eg = engine.graph();
    let of = |pred: &dyn Fn(NodeKind) -> bool| -> BTreeSet<String> {
        eg.ids()
            .filter(|&v| pred(eg.kind(v)))
            .map(|v| eg.name(v).to_string())
            .collect()
    };
    let r = of(&|k| k == NodeKind::Mechanism);
    let vo = of(&|k| k == NodeKind::FullyObserved);
    let vm_u = of(&|k| matches!(k, NodeKind::PartiallyObserved | NodeKind::Latent));
    let mut all = vm_u.clone();
    all.extend(vo.iter().cloned());

    let mcar = engine
        .separated(&SepQuery {
            x: all,
            y: r.clone(),
            z: BTreeSet::new(),
        })
        .expect("sets come from the graph");
    if mcar {
        return Ok(MissingnessClass::Mcar);
    }
    let mar = engine
        .separated(&SepQuery {
            x: vm_u,
            y: r,
            z: vo,
        })
        .expect("sets come from the graph");
    Ok(if mar {
        MissingnessClass::Mar
    } else {
        MissingnessClass::Mnar
    })
}

fn mar_violations(g: &MGraph) -> Vec<String> {
    let mut out = Vec::new();
    for (a, b) in g.directed_edges() {
        if g.kind(b) == NodeKind::Mechanism
            && matches!(g.kind(a), NodeKind::PartiallyObserved | NodeKind::Latent)
        {
            out.push(format!("{} -> {}", g.name(a), g.name(b)));
        }
    }
    for (a, b) in g.bidirected_edges() {
        if g.kind(a) == NodeKind::Mechanism || g.kind(b) == NodeKind::Mechanism {
            out.push(format!("{} <-> {}", g.name(a), g.name(b)));
        }
    }
    out
}

fn mcar_violations(g: &MGraph) -> Vec<String> {
    g.directed_edges()
        .filter(|&(a, b)| g.kind(b) == NodeKind::Mechanism && g.kind(a) == NodeKind::FullyObserved)
        .map(|(a, b)| format!("{} -> {}", g.name(a), g.name(b)))
        .collect()
}

/// Classification by inspecting the edges that touch mechanism nodes.
pub fn classify_by_edges(g: &MGraph) -> Result<MissingnessClass, TaxonomyError> {
    standard(g)?;
    if g.partial().is_empty() {
        return Ok(MissingnessClass::NoMissingness);
    }
    if !mar_violations(g).is_empty() {
        Ok(MissingnessClass::Mnar)
    } else if !mcar_violations(g).is_empty() {
        Ok(MissingnessClass::Mar)
    } else {
        Ok(MissingnessClass::Mcar)
    }
}

pub fn classify(g: &MGraph) -> Result<MissingnessClass, TaxonomyError> {
    let by_dsep = classify_by_dsep(g)?;
    debug_assert_eq!(Ok(by_dsep), classify_by_edges(g));
    Ok(by_dsep)
}

pub fn classify_with_witnesses(g: &MGraph) -> Result<Classification, TaxonomyError> {
    let class = classify(g)?;
    let witnesses = match class {
        MissingnessClass::Mnar => mar_violations(g),
        MissingnessClass::Mar => mcar_violations(g),
        _ => Vec::new(),
    };
    Ok(Classification { class, witnesses })
}
