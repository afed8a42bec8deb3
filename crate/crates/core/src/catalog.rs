//! The example graphs used throughout the guide and the tests.

use crate::graph::{parse_mgraph, MGraph};

macro_rules! graphs {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            pub fn $name() -> MGraph {
                parse_mgraph(include_str!(concat!("../graphs/", $file))).expect($file)
            }
        )*

        /// `(file stem, graph)` for every bundled graph.
        pub fn all() -> Vec<(&'static str, MGraph)> {
            vec![$((stringify!($name), $name())),*]
        }

        /// Source text of a bundled graph by file stem.
        pub fn source(name: &str) -> Option<&'static str> {
            match name {
                $(stringify!($name) => Some(include_str!(concat!("../graphs/", $file))),)*
                _ => None,
            }
        }
    };
}

graphs! {
    obesity_mcar => "obesity_mcar.mg",
    obesity_mar => "obesity_mar.mg",
    obesity_mnar => "obesity_mnar.mg",
    crossed_masks => "crossed_masks.mg",
    pair_sequential => "pair_sequential.mg",
    pair_crossed => "pair_crossed.mg",
    triple_crossed => "triple_crossed.mg",
    attrition_side_effects => "attrition_side_effects.mg",
    attrition_dropout => "attrition_dropout.mg",
    confounded_outcome => "confounded_outcome.mg",
    confounded_pair => "confounded_pair.mg",
    mediator_mask => "mediator_mask.mg",
    selfmask => "selfmask.mg",
    matrix => "matrix.mg",
}
