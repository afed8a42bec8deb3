use serde::{Deserialize, Serialize};

use super::{guarded_atom, Query, RecoveryError};
use crate::dsep::DsepEngine;
use crate::estimand::{Estimand, Justification};
use crate::graph::{mechanism_name, MGraph};

/// Recovery of a self-masked `X` through a fully observed parent `Y` with
/// `Y ⊥ R_X | X`:
///
/// 1. `P(Y|X) = P(Y | X*, R_X=0)`;
/// 2. solve `P(Y=y) = Σ_x P(Y=y|X=x)·P(X=x)` for `P(X)`;
/// 3. if asked, `P(X,Y) = P(Y|X)·P(X)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecoveryPlan {
    pub target: String,
    pub driver: String,
    pub conditional: Estimand,
    pub marginal: Estimand,
    pub joint: bool,
    pub justification: Justification,
}

pub fn plan_matrix_recovery(g: &MGraph, q: &Query) -> Result<MatrixRecoveryPlan, RecoveryError> {
    q.check(g)?;
    let na = |m: &str| Err(RecoveryError::PatternNotApplicable(m.to_string()));
    if !q.context().is_empty() {
        return na("only P(X) or P(X,Y) queries");
    }
    let t = q.targets();
    let selfmasked: Vec<&String> = t
        .iter()
        .filter(|v| {
            g.is_partial(v) && g.has_edge(g.id(v).unwrap(), g.id(&mechanism_name(v)).unwrap())
        })
        .collect();
    let [x] = selfmasked.as_slice() else {
        return na("needs exactly one self-masked target");
    };
    let x = (*x).clone();
    let xid = g.id(&x).unwrap();
    let engine = DsepEngine::new(g);
    let candidates: Vec<String> = g
        .parents(xid)
        .iter()
        .map(|&p| g.name(p).to_string())
        .filter(|p| g.is_observed(p))
        .filter(|p| t.len() == 1 || t.contains(p))
        .collect();
    for y in candidates {
        if t.len() > 2 {
            break;
        }
        let r = mechanism_name(&x);
        if !engine
            .separated_names(&[&y], &[&r], &[&x])
            .expect("names exist")
        {
            continue;
        }
        return Ok(MatrixRecoveryPlan {
            conditional: guarded_atom(
                g,
                &[y.clone()],
                &[x.clone()],
                &[r.clone()].into_iter().collect(),
            ),
            marginal: guarded_atom(g, &[y.clone()], &[], &Default::default()),
            joint: t.len() == 2,
            justification: super::sep_justification(
                &[y.clone()].into_iter().collect(),
                &[r].into_iter().collect(),
                &[x.clone()].into_iter().collect(),
            ),
            target: x,
            driver: y,
        });
    }
    na("no fully observed parent Y of the target with Y independent of its mechanism given the target")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn example7_plan() {
        let p = plan_matrix_recovery(&catalog::matrix(), &Query::joint(&["Y", "I"])).unwrap();
        assert_eq!(p.target, "I");
        assert_eq!(p.driver, "Y");
        assert!(p.joint);
        assert_eq!(p.conditional.render(), "P(Y|I*,R_I=0)");
        assert!(p.justification.verify(&catalog::matrix()));
    }

    #[test]
    fn missing_driver() {
        assert!(matches!(
            plan_matrix_recovery(&catalog::selfmask(), &Query::joint(&["I"])),
            Err(RecoveryError::PatternNotApplicable(_))
        ));
    }
}
