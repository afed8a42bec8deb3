//! Model files: a graph file plus `domain` and `cpt` lines.
//!
//! ```text
//! node A obs
//! node O partial
//! edge A -> O
//! domain A young old
//! cpt A : 0.4 0.6
//! cpt O | A : 0.9 0.1 0.5 0.5
//! cpt R_O : 0.8 0.2
//! ```
//!
//! Values and probabilities may be separated by spaces or commas. Nodes
//! without a `domain` line are binary `0`/`1`.

use std::fmt::Write;

use super::{Cpt, DiscreteModel, SimulationError};
use crate::estimation::Domains;
use crate::graph::{parse_document, serialize_mgraph, SyntaxError, SyntaxErrorKind};

fn split(text: &str) -> Vec<&str> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn err(line: usize, column: usize, msg: impl Into<String>) -> SimulationError {
    SimulationError::Syntax(SyntaxError::new(
        line,
        column,
        SyntaxErrorKind::Other(msg.into()),
    ))
}

pub fn parse_model(text: &str) -> Result<DiscreteModel, SimulationError> {
    let (g, directives) = parse_document(text, &["domain", "cpt"])?;
    let mut domains = Domains::new();
    let mut cpts = Vec::new();
    for d in directives {
        match d.keyword.as_str() {
            "domain" => {
                let parts = split(&d.rest);
                let Some((name, values)) = parts.split_first() else {
                    return Err(err(
                        d.line,
                        d.rest_column,
                        "expected a node name and its values",
                    ));
                };
                if values.is_empty() {
                    return Err(err(
                        d.line,
                        d.rest_column,
                        format!("domain of {name} has no values"),
                    ));
                }
                if domains
                    .insert(
                        name.to_string(),
                        values.iter().map(|v| v.to_string()).collect(),
                    )
                    .is_some()
                {
                    return Err(err(
                        d.line,
                        d.rest_column,
                        format!("second domain for {name}"),
                    ));
                }
            }
            _ => {
                let Some((head, probs)) = d.rest.split_once(':') else {
                    return Err(err(
                        d.line,
                        d.rest_column,
                        "expected ':' before the probabilities",
                    ));
                };
                let (node, parents) = match head.split_once('|') {
                    Some((n, p)) => (n.trim(), split(p)),
                    None => (head.trim(), Vec::new()),
                };
                if node.is_empty() || node.contains(char::is_whitespace) {
                    return Err(err(d.line, d.rest_column, "expected one node name"));
                }
                let probs = split(probs)
                    .into_iter()
                    .map(|p| {
                        p.parse::<f64>().map_err(|_| {
                            err(d.line, d.rest_column, format!("{p:?} is not a number"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                cpts.push(Cpt {
                    node: node.to_string(),
                    parents: parents.into_iter().map(str::to_string).collect(),
                    probs,
                });
            }
        }
    }
    DiscreteModel::new(&g, &domains, cpts)
}

/// Text that [`parse_model`] reads back to an identical model.
pub fn serialize_model(m: &DiscreteModel) -> String {
    let mut out = serialize_mgraph(m.graph());
    for (name, d) in m.domains() {
        if d != &["0", "1"] {
            let _ = writeln!(out, "domain {name} {}", d.join(" "));
        }
    }
    for c in m.cpts() {
        let probs: Vec<String> = c.probs.iter().map(f64::to_string).collect();
        if c.parents.is_empty() {
            let _ = writeln!(out, "cpt {} : {}", c.node, probs.join(" "));
        } else {
            let _ = writeln!(
                out,
                "cpt {} | {} : {}",
                c.node,
                c.parents.join(","),
                probs.join(" ")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::simulator::{random_model, DEFAULT_FLOOR};

    const SMALL: &str = "\
node A obs
node O partial
edge A -> O
domain A young old
cpt A : 0.4, 0.6
cpt O | A : 0.9 0.1 0.5 0.5
cpt R_O : 0.8 0.2
";

    #[test]
    fn parses_small_model() {
        let m = parse_model(SMALL).unwrap();
        assert_eq!(m.domain("A").unwrap(), ["young", "old"]);
        let j = m.enumerate_joint().unwrap();
        assert!(
            (j.get(&[("A", "old"), ("O", "1"), ("R_O", "1")]).unwrap() - 0.6 * 0.5 * 0.2).abs()
                < 1e-15
        );
    }

    #[test]
    fn round_trips() {
        let mut domains = Domains::new();
        domains.insert("W".into(), vec!["a".into(), "b".into(), "c".into()]);
        let m = random_model(&catalog::confounded_outcome(), &domains, DEFAULT_FLOOR, 9).unwrap();
        let back = parse_model(&serialize_model(&m)).unwrap();
        assert!(m.cpts().eq(back.cpts()));
        assert_eq!(m.domains(), back.domains());
    }

    #[test]
    fn reports_line_of_bad_number() {
        let text = SMALL.replace("0.9 0.1", "0.9 x");
        match parse_model(&text) {
            Err(SimulationError::Syntax(e)) => assert_eq!(e.line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_table() {
        let text: String = SMALL
            .lines()
            .filter(|l| !l.starts_with("cpt R_O"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(
            parse_model(&text).unwrap_err(),
            SimulationError::MissingCpt("R_O".into())
        );
    }
}
