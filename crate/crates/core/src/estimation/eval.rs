use std::cell::RefCell;
use std::collections::HashMap;

use super::table::{ObservedDistribution, Table};
use super::EstimationError;
use crate::estimand::{Estimand, ProbAtom, Term};

struct Evaluator<'a> {
    p: &'a ObservedDistribution,
    marginals: RefCell<HashMap<Vec<String>, Table>>,
    domains: RefCell<HashMap<String, Vec<String>>>,
}

impl Evaluator<'_> {
    fn base_domain(&self, var: &str) -> Result<Vec<String>, EstimationError> {
        if let Some(d) = self.domains.borrow().get(var) {
            return Ok(d.clone());
        }
        let d = self
            .p
            .base_domain(var)
            .ok_or_else(|| EstimationError::UnboundVariable(var.to_string()))?;
        self.domains.borrow_mut().insert(var.to_string(), d.clone());
        Ok(d)
    }

    /// Probability of the event given by `(column, value index)` pairs.
    fn event(&self, cells: &[(String, usize)]) -> f64 {
        if cells.is_empty() {
            return 1.0;
        }
        let mut sorted: Vec<&(String, usize)> = cells.iter().collect();
        sorted.sort();
        let key: Vec<String> = sorted.iter().map(|(c, _)| c.clone()).collect();
        let mut cache = self.marginals.borrow_mut();
        let m = cache
            .entry(key.clone())
            .or_insert_with(|| self.p.table.marginal(&key).expect("columns checked"));
        let a: Vec<usize> = sorted.iter().map(|(_, v)| *v).collect();
        m.probs()[m.index(&a)]
    }

    fn cell(
        &self,
        t: &Term,
        env: &HashMap<String, usize>,
    ) -> Result<(String, usize), EstimationError> {
        let col = t.column();
        let domain = self
            .p
            .table
            .domain(&col)
            .ok_or_else(|| EstimationError::NotObservable(col.clone()))?;
        let idx = match &t.value {
            Some(v) => domain.iter().position(|d| d == v).ok_or_else(|| {
                EstimationError::DomainMismatch {
                    column: col.clone(),
                    detail: format!("value {v} not in domain"),
                }
            })?,
            None => *env
                .get(&t.var.name)
                .ok_or_else(|| EstimationError::UnboundVariable(t.var.name.clone()))?,
        };
        Ok((col, idx))
    }

    fn atom(&self, a: &ProbAtom, env: &HashMap<String, usize>) -> Result<f64, EstimationError> {
        if !a.do_vars.is_empty() {
            return Err(EstimationError::Interventional(a.to_string()));
        }
        let conds: Vec<(String, usize)> = a
            .conditions
            .iter()
            .map(|t| self.cell(t, env))
            .collect::<Result<_, _>>()?;
        let mut joint = conds.clone();
        for t in &a.targets {
            joint.push(self.cell(t, env)?);
        }
        let den = self.event(&conds);
        if den <= 0.0 {
            let desc: Vec<String> = conds
                .iter()
                .map(|(c, i)| {
                    format!(
                        "{c}={}",
                        self.p.table.domain(c).map_or("?", |d| d[*i].as_str())
                    )
                })
                .collect();
            return Err(EstimationError::ZeroProbabilityConditioning(desc.join(",")));
        }
        Ok(self.event(&joint) / den)
    }

    fn eval(&self, e: &Estimand, env: &mut HashMap<String, usize>) -> Result<f64, EstimationError> {
        Ok(match e {
            Estimand::Atom(a) => self.atom(a, env)?,
            Estimand::Product(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= self.eval(f, env)?;
                }
                acc
            }
            Estimand::Quotient(a, b) => {
                let den = self.eval(b, env)?;
                if den == 0.0 {
                    return Err(EstimationError::ZeroProbabilityConditioning(format!(
                        "denominator {b}"
                    )));
                }
                self.eval(a, env)? / den
            }
            Estimand::Difference(a, b) => self.eval(a, env)? - self.eval(b, env)?,
            Estimand::SumOver(v, body) => {
                let n = self.base_domain(v)?.len();
                let saved = env.remove(v);
                let mut acc = 0.0;
                for i in 0..n {
                    env.insert(v.clone(), i);
                    acc += self.eval(body, env)?;
                }
                env.remove(v);
                if let Some(s) = saved {
                    env.insert(v.clone(), s);
                }
                acc
            }
        })
    }
}

/// Evaluates `e` on `p`, giving a table over the free variables of `e`
/// (sorted by name, base domains).
pub fn evaluate(e: &Estimand, p: &ObservedDistribution) -> Result<Table, EstimationError> {
    let ev = Evaluator {
        p,
        marginals: RefCell::new(HashMap::new()),
        domains: RefCell::new(HashMap::new()),
    };
    let free: Vec<String> = e.free_vars().into_iter().collect();
    let domains: Vec<Vec<String>> = free
        .iter()
        .map(|v| ev.base_domain(v))
        .collect::<Result<_, _>>()?;
    let mut out = Table::zeros(free.clone(), domains);
    let mut env = HashMap::new();
    for idx in 0..out.len() {
        for (v, a) in free.iter().zip(out.assignment(idx)) {
            env.insert(v.clone(), a);
        }
        out.probs_mut()[idx] = ev.eval(e, &mut env)?;
    }
    Ok(out)
}
