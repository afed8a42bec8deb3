use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::table::{ObservedDistribution, Source, Table};
use super::EstimationError;

/// Smallest expected count a stratum needs to enter the test.
pub const MIN_EXPECTED: f64 = 5.0;

/// `x ⊥ y | given` over observed-data columns, within the slice where each
/// `fixed` column takes its value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiSpec {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub given: Vec<String>,
    pub fixed: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub strata_used: usize,
    pub strata_dropped: usize,
}

struct Layout {
    table: Table,
    nx: usize,
    ny: usize,
    ng: usize,
}

fn layout(spec: &CiSpec, p: &ObservedDistribution) -> Result<Layout, EstimationError> {
    let cols: Vec<String> = spec
        .fixed
        .iter()
        .map(|(c, _)| c.clone())
        .chain(spec.given.iter().cloned())
        .chain(spec.x.iter().cloned())
        .chain(spec.y.iter().cloned())
        .collect();
    for c in &cols {
        if p.table.domain(c).is_none() {
            return Err(EstimationError::NotObservable(c.clone()));
        }
    }
    let m = p.table.marginal(&cols).expect("columns checked");
    // Slice on the fixed values.
    let mut fixed_idx = Vec::new();
    for (c, v) in &spec.fixed {
        let d = m.domain(c).unwrap();
        fixed_idx.push(d.iter().position(|x| x == v).ok_or_else(|| {
            EstimationError::DomainMismatch {
                column: c.clone(),
                detail: format!("value {v} not in domain"),
            }
        })?);
    }
    let size = |names: &[String]| {
        names
            .iter()
            .map(|c| m.domain(c).unwrap().len())
            .product::<usize>()
    };
    let (ng, nx, ny) = (size(&spec.given), size(&spec.x), size(&spec.y));
    let block = ng * nx * ny;
    let mut offset = 0;
    for (i, (c, _)) in spec.fixed.iter().enumerate() {
        offset = offset * m.domain(c).unwrap().len() + fixed_idx[i];
    }
    let rest: Vec<String> = cols[spec.fixed.len()..].to_vec();
    let rest_domains: Vec<Vec<String>> =
        rest.iter().map(|c| m.domain(c).unwrap().to_vec()).collect();
    let probs = m.probs()[offset * block..(offset + 1) * block].to_vec();
    Ok(Layout {
        table: Table::new(rest, rest_domains, probs),
        nx,
        ny,
        ng,
    })
}

/// Likelihood-ratio (G) test of `spec` on an empirical distribution.
pub fn run_test(
    spec: &CiSpec,
    p: &ObservedDistribution,
    alpha: f64,
) -> Result<TestResult, EstimationError> {
    let Source::Empirical { n } = p.source else {
        return Err(EstimationError::NeedsCounts);
    };
    let l = layout(spec, p)?;
    let counts: Vec<f64> = l
        .table
        .probs()
        .iter()
        .map(|&q| (q * n as f64).round())
        .collect();
    let (mut g, mut df, mut used, mut dropped) = (0.0, 0usize, 0usize, 0usize);
    for s in 0..l.ng {
        let cell = |i: usize, j: usize| counts[(s * l.nx + i) * l.ny + j];
        let rows: Vec<f64> = (0..l.nx)
            .map(|i| (0..l.ny).map(|j| cell(i, j)).sum())
            .collect();
        let cols: Vec<f64> = (0..l.ny)
            .map(|j| (0..l.nx).map(|i| cell(i, j)).sum())
            .collect();
        let total: f64 = rows.iter().sum();
        let live_rows: Vec<usize> = (0..l.nx).filter(|&i| rows[i] > 0.0).collect();
        let live_cols: Vec<usize> = (0..l.ny).filter(|&j| cols[j] > 0.0).collect();
        if live_rows.len() < 2 || live_cols.len() < 2 {
            dropped += 1;
            continue;
        }
        let min_expected = live_rows
            .iter()
            .flat_map(|&i| live_cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| rows[i] * cols[j] / total)
            .fold(f64::INFINITY, f64::min);
        if min_expected < MIN_EXPECTED {
            dropped += 1;
            continue;
        }
        for &i in &live_rows {
            for &j in &live_cols {
                let o = cell(i, j);
                if o > 0.0 {
                    g += 2.0 * o * (o * total / (rows[i] * cols[j])).ln();
                }
            }
        }
        df += (live_rows.len() - 1) * (live_cols.len() - 1);
        used += 1;
    }
    if used == 0 || df == 0 {
        return Err(EstimationError::InsufficientData);
    }
    let g = g.max(0.0);
    let p_value = ChiSquared::new(df as f64)
        .expect("positive df")
        .sf(g)
        .clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: g,
        df,
        p_value,
        alpha,
        reject: p_value < alpha,
        strata_used: used,
        strata_dropped: dropped,
    })
}

/// Largest `|P(x,y|g) − P(x|g)·P(y|g)|` over strata with positive mass.
pub fn ci_violation(spec: &CiSpec, p: &ObservedDistribution) -> Result<f64, EstimationError> {
    let l = layout(spec, p)?;
    let q = l.table.probs();
    let mut worst: f64 = 0.0;
    for s in 0..l.ng {
        let cell = |i: usize, j: usize| q[(s * l.nx + i) * l.ny + j];
        let total: f64 = (0..l.nx)
            .flat_map(|i| (0..l.ny).map(move |j| (i, j)))
            .map(|(i, j)| cell(i, j))
            .sum();
        if total <= 0.0 {
            continue;
        }
        for i in 0..l.nx {
            let r: f64 = (0..l.ny).map(|j| cell(i, j)).sum();
            for j in 0..l.ny {
                let c: f64 = (0..l.nx).map(|k| cell(k, j)).sum();
                worst = worst.max((cell(i, j) / total - (r / total) * (c / total)).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(probs: Vec<f64>, n: u64) -> ObservedDistribution {
        let d = vec!["0".to_string(), "1".to_string()];
        ObservedDistribution {
            table: Table::new(vec!["A".into(), "B".into()], vec![d.clone(), d], probs),
            source: Source::Empirical { n },
        }
    }

    fn spec() -> CiSpec {
        CiSpec {
            x: vec!["A".into()],
            y: vec!["B".into()],
            given: vec![],
            fixed: vec![],
        }
    }

    #[test]
    fn independent_table_is_not_rejected() {
        let r = run_test(&spec(), &dist(vec![0.25, 0.25, 0.25, 0.25], 1000), 0.05).unwrap();
        assert!(r.statistic.abs() < 1e-9);
        assert!((r.p_value - 1.0).abs() < 1e-9);
        assert_eq!(r.df, 1);
        assert!(!r.reject);
    }

    #[test]
    fn dependent_table_is_rejected() {
        // Oracle: G = 2 Σ O ln(O/E) computed by hand for counts 40/10/10/40.
        let r = run_test(&spec(), &dist(vec![0.4, 0.1, 0.1, 0.4], 100), 0.05).unwrap();
        let expected =
            2.0 * (2.0 * 40.0 * (40.0f64 / 25.0).ln() + 2.0 * 10.0 * (10.0f64 / 25.0).ln());
        assert!((r.statistic - expected).abs() < 1e-9);
        assert!(r.reject);
    }

    #[test]
    fn sparse_data_is_insufficient() {
        assert_eq!(
            run_test(&spec(), &dist(vec![0.25, 0.25, 0.25, 0.25], 8), 0.05),
            Err(EstimationError::InsufficientData)
        );
    }

    #[test]
    fn exact_violation() {
        let mut p = dist(vec![0.4, 0.1, 0.1, 0.4], 1);
        p.source = Source::Exact;
        assert!((ci_violation(&spec(), &p).unwrap() - 0.15).abs() < 1e-12);
    }
}
