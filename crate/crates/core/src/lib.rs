//! Missingness graphs (m-graphs) and what can be learned from data with
//! missing entries.

pub mod catalog;
pub mod causal;
pub mod dsep;
pub mod estimand;
pub mod estimation;
pub mod graph;
pub mod recovery;
pub mod simulator;
pub mod taxonomy;
pub mod testability;

pub use estimand::{Estimand, ProbAtom, Term};
pub use graph::{MGraph, NodeId, NodeKind};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/recovery.md")]
    mod recovery {}
    #[doc = include_str!("../../../book/src/causal.md")]
    mod causal {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
