use std::fmt::Write as _;

use misslab::causal::{recover_causal, CausalOptions, CausalQuery};
use misslab::dsep::{d_separated, SepQuery};
use misslab::estimation::{
    empirical_distribution, evaluate, run_test, solve_matrix_recovery, CiSpec, Dataset,
    EstimationError, Table,
};
use misslab::recovery::{
    plan_matrix_recovery, recover, sequential_factorizations, Query, RecoveryOutcome, SearchOptions,
};
use misslab::simulator::DiscreteModel;
use misslab::taxonomy::{classify_with_witnesses, MissingnessClass};
use misslab::testability::{
    implications, mar_test_suite, mcar_test_suite, testable_implications, Status,
};
use misslab::MGraph;
use serde_json::json;

use crate::report::Output;
use crate::Failure;

/// Most factorizations listed by `recover --all-factorizations`.
const FACTORIZATION_LIMIT: usize = 1000;

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

pub fn classify(g: &MGraph) -> Result<Output, Failure> {
    let c = classify_with_witnesses(g).map_err(domain)?;
    let mut text = format!("{}\n", c.class);
    if c.class == MissingnessClass::Mnar {
        for w in &c.witnesses {
            let _ = writeln!(text, "witness: {w}");
        }
    }
    Ok(Output {
        outcome: json!(c),
        justification: c.witnesses.clone(),
        text,
    })
}

pub fn dsep(g: &MGraph, x: &[String], y: &[String], z: &[String]) -> Result<Output, Failure> {
    let q = SepQuery::new(x, y, z);
    let separated = d_separated(g, &q).map_err(domain)?;
    let verdict = if separated { "separated" } else { "connected" };
    Ok(Output {
        outcome: json!({ "query": q, "separated": separated }),
        justification: vec![q.to_string()],
        text: format!("{verdict}\n"),
    })
}

fn outcome_text(out: &RecoveryOutcome) -> (String, Vec<String>) {
    let mut text = String::new();
    let mut trail = Vec::new();
    match out {
        RecoveryOutcome::Recovered(c) => {
            let _ = writeln!(text, "method: {}", c.method);
            let _ = writeln!(text, "estimand: {}", c.estimand);
            if !c.justifications.is_empty() {
                text.push_str("justifications:\n");
            }
            for j in &c.justifications {
                let _ = writeln!(text, "  {j}");
                trail.push(j.to_string());
            }
            for n in &c.notes {
                let _ = writeln!(text, "note: {n}");
            }
        }
        RecoveryOutcome::NonRecoverable(nr) => {
            text.push_str("NonRecoverable\n");
            let _ = writeln!(text, "witness: {nr}");
            trail.push(nr.to_string());
            for n in &nr.notes {
                let _ = writeln!(text, "note: {n}");
            }
        }
        RecoveryOutcome::Unknown(reason) => {
            let _ = writeln!(text, "Unknown: {reason}");
        }
    }
    (text, trail)
}

fn recovery_json(out: &RecoveryOutcome) -> serde_json::Value {
    json!({
        "status": out.label(),
        "estimand_text": out.estimand().map(|e| e.render()),
        "detail": out,
    })
}

pub fn recover_query(g: &MGraph, q: &Query, all: bool) -> Result<Output, Failure> {
    let opts = SearchOptions::default();
    if all {
        let mut certs =
            sequential_factorizations(g, q, opts, FACTORIZATION_LIMIT).map_err(domain)?;
        // Different orderings can reach the same product.
        let mut seen = std::collections::HashSet::new();
        certs.retain(|c| seen.insert(c.estimand.render()));
        let mut text = String::new();
        for c in &certs {
            let _ = writeln!(text, "{}", c.estimand);
        }
        if certs.is_empty() {
            text.push_str("no admissible ordered factorization\n");
        }
        let texts: Vec<String> = certs.iter().map(|c| c.estimand.render()).collect();
        return Ok(Output {
            outcome: json!({ "query": q.to_string(), "factorizations": texts }),
            justification: certs
                .iter()
                .flat_map(|c| c.justifications.iter().map(|j| j.to_string()))
                .collect(),
            text,
        });
    }
    let out = recover(g, q, opts).map_err(domain)?;
    let (text, justification) = outcome_text(&out);
    Ok(Output {
        outcome: recovery_json(&out),
        justification,
        text,
    })
}

pub fn recover_do(g: &MGraph, q: &CausalQuery, depth: usize) -> Result<Output, Failure> {
    let opts = CausalOptions {
        depth_cap: depth,
        ..CausalOptions::default()
    };
    let out = recover_causal(g, q, opts).map_err(domain)?;
    let (text, justification) = outcome_text(&out);
    Ok(Output {
        outcome: recovery_json(&out),
        justification,
        text,
    })
}

pub fn list_implications(g: &MGraph) -> Result<Output, Failure> {
    let imps = implications(g).map_err(domain)?;
    let mut text = String::new();
    for i in &imps {
        match (&i.status, &i.equation) {
            (Status::Testable(form), Some(eq)) => {
                let _ = writeln!(text, "{}: testable, form {}: {eq}", i.claim, form.number());
            }
            (Status::Untestable, _) => {
                let _ = writeln!(text, "{}: untestable", i.claim);
            }
            _ => {
                let _ = writeln!(text, "{}: unknown", i.claim);
            }
        }
    }
    Ok(Output {
        outcome: json!(imps),
        justification: imps.iter().map(|i| i.claim.to_string()).collect(),
        text,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SuiteKind {
    /// Tests implied by MAR.
    Mar,
    /// Tests implied by MCAR.
    Mcar,
    /// Testable implications of the graph itself.
    Graph,
}

struct Planned {
    claim: String,
    form: u8,
    equation: String,
    ci: CiSpec,
    hint: Option<String>,
}

fn plan_suite(g: &MGraph, kind: SuiteKind) -> Result<(Vec<Planned>, Option<String>), Failure> {
    let suite = match kind {
        SuiteKind::Mar => mar_test_suite(&g.partial(), &g.observed()).map_err(domain)?,
        SuiteKind::Mcar => mcar_test_suite(&g.partial(), &g.observed()).map_err(domain)?,
        SuiteKind::Graph => {
            let imps = implications(g).map_err(domain)?;
            let planned = testable_implications(g)
                .map_err(domain)?
                .into_iter()
                .map(|(claim, eq)| {
                    let form = imps
                        .iter()
                        .find_map(|i| match i.status {
                            Status::Testable(f) if i.claim == claim => Some(f.number()),
                            _ => None,
                        })
                        .unwrap_or(1);
                    Planned {
                        claim: claim.to_string(),
                        form,
                        equation: eq.to_string(),
                        ci: eq.ci,
                        hint: None,
                    }
                })
                .collect();
            return Ok((planned, None));
        }
    };
    let planned = suite
        .tests
        .into_iter()
        .map(|t| Planned {
            claim: t.claim.to_string(),
            form: t.form.number(),
            equation: t.equation.to_string(),
            ci: t.equation.ci,
            hint: Some(t.hint),
        })
        .collect();
    Ok((planned, suite.notice))
}

pub fn suite(g: &MGraph, kind: SuiteKind) -> Result<Output, Failure> {
    let (planned, notice) = plan_suite(g, kind)?;
    let mut text = String::new();
    for p in &planned {
        let _ = writeln!(text, "{} (form {}): {}", p.claim, p.form, p.equation);
    }
    if let Some(n) = &notice {
        let _ = writeln!(text, "notice: {n}");
    }
    let tests: Vec<_> = planned
        .iter()
        .map(
            |p| json!({ "claim": p.claim, "form": p.form, "equation": p.equation, "hint": p.hint }),
        )
        .collect();
    Ok(Output {
        outcome: json!({ "tests": tests, "notice": notice }),
        justification: planned.iter().map(|p| p.claim.clone()).collect(),
        text,
    })
}

fn table_text(t: &Table) -> String {
    let mut text = String::new();
    let mut header: Vec<&str> = t.vars().iter().map(String::as_str).collect();
    header.push("P");
    let _ = writeln!(text, "{}", header.join("\t"));
    for (i, p) in t.probs().iter().enumerate() {
        let a = t.assignment(i);
        let mut row: Vec<String> = a
            .iter()
            .zip(t.domains())
            .map(|(&k, d)| d[k].clone())
            .collect();
        row.push(format!("{p:.6}"));
        let _ = writeln!(text, "{}", row.join("\t"));
    }
    text
}

pub fn estimate(g: &MGraph, data: &Dataset, q: &Query) -> Result<Output, Failure> {
    let p = empirical_distribution(data, g, None).map_err(domain)?;
    let out = recover(g, q, SearchOptions::default()).map_err(domain)?;
    let (table, method, estimand, trail) = match &out {
        RecoveryOutcome::Recovered(c) => {
            let t = evaluate(&c.estimand, &p).map_err(domain)?;
            (
                t,
                c.method.to_string(),
                c.estimand.render(),
                c.justifications.iter().map(|j| j.to_string()).collect(),
            )
        }
        RecoveryOutcome::NonRecoverable(nr) => match plan_matrix_recovery(g, q) {
            Ok(plan) => {
                let t = solve_matrix_recovery(&plan, &p).map_err(domain)?;
                let text = format!(
                    "{} solved against P({})",
                    plan.conditional.render(),
                    plan.driver
                );
                (
                    t,
                    "MatrixInversion".to_string(),
                    text,
                    vec![plan.justification.to_string()],
                )
            }
            Err(_) => return Err(Failure::Domain(format!("{q} is not recoverable: {nr}"))),
        },
        RecoveryOutcome::Unknown(reason) => {
            return Err(Failure::Domain(format!(
                "no estimand found for {q}: {reason}"
            )));
        }
    };
    let mut text = format!("method: {method}\nestimand: {estimand}\n");
    text.push_str(&table_text(&table));
    Ok(Output {
        outcome: json!({ "query": q.to_string(), "method": method, "estimand_text": estimand, "rows": data.len(), "table": table }),
        justification: trail,
        text,
    })
}

pub fn test(g: &MGraph, data: &Dataset, kind: SuiteKind, alpha: f64) -> Result<Output, Failure> {
    let p = empirical_distribution(data, g, None).map_err(domain)?;
    let (planned, notice) = plan_suite(g, kind)?;
    // Bonferroni across the suite.
    let level = alpha / planned.len().max(1) as f64;
    let mut text = String::new();
    let mut results = Vec::new();
    let mut trail = Vec::new();
    let mut rejected = false;
    for t in &planned {
        match run_test(&t.ci, &p, level) {
            Ok(r) => {
                let verdict = if r.reject { "reject" } else { "accept" };
                let _ = writeln!(
                    text,
                    "{}: G={:.3} df={} p={:.4} {verdict}",
                    t.claim, r.statistic, r.df, r.p_value
                );
                if r.reject {
                    rejected = true;
                    if let Some(h) = &t.hint {
                        let _ = writeln!(text, "  {h}");
                        trail.push(format!("{}: {h}", t.claim));
                    }
                }
                results.push(json!({ "claim": t.claim, "equation": t.equation, "result": r }));
            }
            Err(EstimationError::InsufficientData) => {
                let _ = writeln!(text, "{}: insufficient data", t.claim);
                results.push(json!({ "claim": t.claim, "equation": t.equation, "result": null }));
            }
            Err(e) => return Err(domain(e)),
        }
    }
    if let Some(n) = &notice {
        let _ = writeln!(text, "notice: {n}");
    }
    let verdict = if rejected { "rejected" } else { "not rejected" };
    let _ = writeln!(
        text,
        "verdict: {verdict} at alpha {alpha} (per test {level:.4})"
    );
    Ok(Output {
        outcome: json!({ "alpha": alpha, "per_test_alpha": level, "rejected": rejected, "tests": results, "notice": notice }),
        justification: trail,
        text,
    })
}

pub fn simulate(
    m: &DiscreteModel,
    n: usize,
    seed: u64,
    na: &str,
) -> Result<(Dataset, Output), Failure> {
    let d = m.sample(n, seed).map_err(domain)?;
    let out = Output {
        outcome: json!({ "rows": n, "seed": seed, "columns": d.columns().iter().map(|c| &c.name).collect::<Vec<_>>(), "na_marker": na }),
        justification: Vec::new(),
        text: String::new(),
    };
    Ok((d, out))
}
