use nalgebra::{DMatrix, DVector};

use super::eval::evaluate;
use super::table::{ObservedDistribution, Source, Table};
use super::EstimationError;
use crate::recovery::MatrixRecoveryPlan;

/// Condition number above which the system counts as singular.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Solves `P(Y=y) = Σ_x P(Y=y|X=x)·P(X=x)` for `P(X)`, or returns the joint
/// `P(X,Y)` when the plan asks for it.
pub fn solve_matrix_recovery(
    plan: &MatrixRecoveryPlan,
    p: &ObservedDistribution,
) -> Result<Table, EstimationError> {
    let cond = evaluate(&plan.conditional, p)?;
    let marg = evaluate(&plan.marginal, p)?;
    let (x, y) = (&plan.target, &plan.driver);
    let xd = p
        .base_domain(x)
        .ok_or_else(|| EstimationError::UnboundVariable(x.clone()))?;
    let yd = p
        .base_domain(y)
        .ok_or_else(|| EstimationError::UnboundVariable(y.clone()))?;
    if yd.len() < xd.len() {
        return Err(EstimationError::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    let m = DMatrix::from_fn(yd.len(), xd.len(), |i, j| {
        cond.get(&[(y.as_str(), yd[i].as_str()), (x.as_str(), xd[j].as_str())])
            .unwrap()
    });
    let b = DVector::from_fn(yd.len(), |i, _| {
        marg.get(&[(y.as_str(), yd[i].as_str())]).unwrap()
    });

    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(EstimationError::SingularSystem { condition });
    }
    let pi = svd
        .solve(&b, 0.0)
        .map_err(|_| EstimationError::SingularSystem { condition })?;

    let tol = match p.source {
        Source::Exact => 1e-9,
        Source::Empirical { .. } => 1e-3,
    };
    if let Some(bad) = pi.iter().find(|&&v| v < -tol || v > 1.0 + tol) {
        return Err(EstimationError::InfeasibleSolution { value: *bad });
    }
    let mut probs: Vec<f64> = pi.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v /= total);

    if !plan.joint {
        return Ok(Table::new(vec![x.clone()], vec![xd], probs));
    }
    // Joint over the two variables, in name order.
    let (first, second) = if x < y {
        ((x, &xd), (y, &yd))
    } else {
        ((y, &yd), (x, &xd))
    };
    let mut out = Table::zeros(
        vec![first.0.clone(), second.0.clone()],
        vec![first.1.clone(), second.1.clone()],
    );
    for idx in 0..out.len() {
        let a = out.assignment(idx);
        let (xi, yi) = if x < y { (a[0], a[1]) } else { (a[1], a[0]) };
        out.probs_mut()[idx] = m[(yi, xi)] * probs[xi];
    }
    Ok(out)
}
