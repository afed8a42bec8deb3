use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A dense probability table, row-major with the last variable varying
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    vars: Vec<String>,
    domains: Vec<Vec<String>>,
    probs: Vec<f64>,
}

impl Table {
    pub fn new(vars: Vec<String>, domains: Vec<Vec<String>>, probs: Vec<f64>) -> Table {
        assert_eq!(vars.len(), domains.len());
        assert_eq!(
            probs.len(),
            domains.iter().map(|d| d.len()).product::<usize>()
        );
        Table {
            vars,
            domains,
            probs,
        }
    }

    pub fn zeros(vars: Vec<String>, domains: Vec<Vec<String>>) -> Table {
        let n = domains.iter().map(|d| d.len()).product();
        Table {
            vars,
            domains,
            probs: vec![0.0; n],
        }
    }

    /// The table with no variables and a single cell holding `value`.
    pub fn scalar(value: f64) -> Table {
        Table {
            vars: Vec::new(),
            domains: Vec::new(),
            probs: vec![value],
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn domain(&self, var: &str) -> Option<&[String]> {
        self.position(var).map(|i| self.domains[i].as_slice())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn position(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Flat index of a full assignment of value indices.
    pub fn index(&self, assignment: &[usize]) -> usize {
        let mut idx = 0;
        for (a, d) in assignment.iter().zip(&self.domains) {
            idx = idx * d.len() + a;
        }
        idx
    }

    /// Value indices of the cell at `idx`.
    pub fn assignment(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.vars.len()];
        for (slot, d) in out.iter_mut().zip(&self.domains).rev() {
            *slot = idx % d.len();
            idx /= d.len();
        }
        out
    }

    /// Cell value by `(variable, value)` pairs covering every variable.
    pub fn get(&self, cell: &[(&str, &str)]) -> Option<f64> {
        let mut assignment = vec![usize::MAX; self.vars.len()];
        for (var, val) in cell {
            let i = self.position(var)?;
            assignment[i] = self.domains[i].iter().position(|d| d == val)?;
        }
        if assignment.contains(&usize::MAX) {
            return None;
        }
        Some(self.probs[self.index(&assignment)])
    }

    /// Marginal over `keep`, in that order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Option<Table> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|k| self.position(k.as_ref()))
            .collect::<Option<_>>()?;
        let domains: Vec<Vec<String>> = pos.iter().map(|&i| self.domains[i].clone()).collect();
        let mut out = Table::zeros(
            keep.iter().map(|k| k.as_ref().to_string()).collect(),
            domains,
        );
        let mut a = vec![0usize; self.vars.len()];
        for &p in &self.probs {
            let mut idx = 0;
            for (&i, d) in pos.iter().zip(&out.domains) {
                idx = idx * d.len() + a[i];
            }
            out.probs[idx] += p;
            for k in (0..a.len()).rev() {
                a[k] += 1;
                if a[k] < self.domains[k].len() {
                    break;
                }
                a[k] = 0;
            }
        }
        Some(out)
    }

    /// `P(targets | given)` over `given` followed by `targets`. Cells whose
    /// conditioning event has no mass are NaN.
    pub fn conditional<S: AsRef<str>, T: AsRef<str>>(
        &self,
        targets: &[S],
        given: &[T],
    ) -> Option<Table> {
        let keep: Vec<&str> = given
            .iter()
            .map(AsRef::as_ref)
            .chain(targets.iter().map(AsRef::as_ref))
            .collect();
        let mut joint = self.marginal(&keep)?;
        let block: usize = joint.domains[given.len()..]
            .iter()
            .map(|d| d.len())
            .product();
        for chunk in joint.probs.chunks_mut(block) {
            let mass: f64 = chunk.iter().sum();
            chunk
                .iter_mut()
                .for_each(|p| *p = if mass > 0.0 { *p / mass } else { f64::NAN });
        }
        Some(joint)
    }

    /// Largest absolute cell difference against `other` after aligning
    /// variables and values by name. `None` if the supports differ.
    pub fn max_abs_diff(&self, other: &Table) -> Option<f64> {
        self.diffs(other).map(|d| d.into_iter().fold(0.0, f64::max))
    }

    /// Sum of absolute cell differences, aligned as in [`Table::max_abs_diff`].
    pub fn l1(&self, other: &Table) -> Option<f64> {
        self.diffs(other).map(|d| d.into_iter().sum())
    }

    fn diffs(&self, other: &Table) -> Option<Vec<f64>> {
        if self.vars.len() != other.vars.len() {
            return None;
        }
        let maps: Vec<(usize, HashMap<&str, usize>)> = self
            .vars
            .iter()
            .map(|v| {
                let j = other.position(v)?;
                let m = other.domains[j]
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.as_str(), k))
                    .collect();
                Some((j, m))
            })
            .collect::<Option<_>>()?;
        for (i, (j, _)) in maps.iter().enumerate() {
            if self.domains[i].len() != other.domains[*j].len() {
                return None;
            }
        }
        let mut out = Vec::with_capacity(self.probs.len());
        let mut theirs = vec![0usize; other.vars.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            let a = self.assignment(idx);
            for (i, (j, m)) in maps.iter().enumerate() {
                theirs[*j] = *m.get(self.domains[i][a[i]].as_str())?;
            }
            let d = (p - other.probs[other.index(&theirs)]).abs();
            out.push(if d.is_nan() { f64::INFINITY } else { d });
        }
        Some(out)
    }
}

/// Where an observed-data table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Exact,
    Empirical { n: u64 },
}

/// A table over observed-data columns: fully observed variables `A`,
/// proxies `X*` (whose domain ends with the missing marker) and
/// mechanisms `R_X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedDistribution {
    pub table: Table,
    pub source: Source,
}

impl ObservedDistribution {
    /// Domain of a substantive variable: its own column, or its proxy's
    /// column without the missing marker.
    pub fn base_domain(&self, var: &str) -> Option<Vec<String>> {
        if let Some(d) = self.table.domain(var) {
            return Some(d.to_vec());
        }
        let d = self.table.domain(&format!("{var}*"))?;
        Some(d[..d.len() - 1].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Table {
        let d = vec!["0".to_string(), "1".to_string()];
        Table::new(
            vec!["A".into(), "B".into()],
            vec![d.clone(), d],
            vec![0.1, 0.2, 0.3, 0.4],
        )
    }

    #[test]
    fn indexing() {
        let t = t();
        assert_eq!(t.get(&[("A", "1"), ("B", "0")]), Some(0.3));
        assert_eq!(t.assignment(3), vec![1, 1]);
        assert_eq!(t.index(&[1, 0]), 2);
    }

    #[test]
    fn marginals_and_alignment() {
        let t = t();
        let b = t.marginal(&["B"]).unwrap();
        assert!((b.probs()[0] - 0.4).abs() < 1e-15);
        let swapped = t.marginal(&["B", "A"]).unwrap();
        assert_eq!(t.max_abs_diff(&swapped), Some(0.0));
        assert!((t.marginal::<&str>(&[]).unwrap().probs()[0] - 1.0).abs() < 1e-15);
    }
}
