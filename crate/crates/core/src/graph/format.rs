//! Line-oriented text format for m-graphs.
//!
//! ```text
//! # age drives both obesity and whether it is recorded
//! node A obs
//! node G obs
//! node O partial
//! edge A -> O
//! edge G -> O
//! edge A -> R_O
//! biedge A <-> G
//! option allow-mechanism-children
//! ```
//!
//! Mechanisms `R_X` and proxies `X*` are implicit. Mechanisms may be used in
//! edges once `X` is declared partial; proxies never appear.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::{mechanism_name, valid_name, GraphError, MGraph, NodeKind, MECHANISM_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxErrorKind {
    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown node kind {0:?} (expected obs, partial or latent)")]
    UnknownKind(String),
    #[error("undeclared node {0}")]
    UndeclaredNode(String),
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("unexpected trailing input {0:?}")]
    Trailing(String),
    #[error("unknown option {0:?}")]
    UnknownOption(String),
    #[error("{0}")]
    Graph(GraphError),
    #[error("{0}")]
    Other(String),
}

/// A parse failure at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub kind: SyntaxErrorKind,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)
    }
}

impl SyntaxError {
    pub(crate) fn new(line: usize, column: usize, kind: SyntaxErrorKind) -> Self {
        SyntaxError { line, column, kind }
    }
}

/// A line with a keyword the graph grammar does not own, handed back to the
/// caller (model files add `domain` and `cpt` lines).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Directive {
    pub line: usize,
    pub keyword: String,
    /// Remainder of the line after the keyword, comment stripped.
    pub rest: String,
    /// 1-based column where `rest` starts.
    pub rest_column: usize,
}

/// Whitespace tokens of a line, each with its 1-based column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_mgraph(text: &str) -> Result<MGraph, SyntaxError> {
    parse_document(text, &[]).map(|(g, _)| g)
}

pub(crate) fn parse_document(
    text: &str,
    extra_keywords: &[&str],
) -> Result<(MGraph, Vec<Directive>), SyntaxError> {
    struct EdgeLine<'a> {
        line: usize,
        a: (usize, &'a str),
        b: (usize, &'a str),
        bidirected: bool,
    }

    let mut nodes: Vec<(String, NodeKind)> = Vec::new();
    let mut declared: HashMap<String, (usize, NodeKind)> = HashMap::new();
    let mut edges: Vec<EdgeLine> = Vec::new();
    let mut directives = Vec::new();
    let mut allow_mechanism_children = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = strip_comment(raw);
        let toks = tokens(line);
        let Some(&(kw_col, keyword)) = toks.first() else {
            continue;
        };
        let err = |col: usize, kind| SyntaxError::new(line_no, col, kind);
        let end_col = line.trim_end().len() + 1;
        match keyword {
            "node" => {
                let &(ncol, name) = toks
                    .get(1)
                    .ok_or(err(end_col, SyntaxErrorKind::Expected("node name")))?;
                let &(kcol, kind) = toks
                    .get(2)
                    .ok_or(err(end_col, SyntaxErrorKind::Expected("node kind")))?;
                if let Some(&(c, t)) = toks.get(3) {
                    return Err(err(c, SyntaxErrorKind::Trailing(t.to_string())));
                }
                if !valid_name(name) {
                    return Err(err(ncol, SyntaxErrorKind::InvalidName(name.to_string())));
                }
                let kind = match kind {
                    "obs" => NodeKind::FullyObserved,
                    "partial" => NodeKind::PartiallyObserved,
                    "latent" => NodeKind::Latent,
                    other => {
                        return Err(err(kcol, SyntaxErrorKind::UnknownKind(other.to_string())))
                    }
                };
                if declared.contains_key(name) {
                    return Err(err(
                        ncol,
                        SyntaxErrorKind::Graph(GraphError::DuplicateName(name.to_string())),
                    ));
                }
                declared.insert(name.to_string(), (line_no, kind));
                nodes.push((name.to_string(), kind));
            }
            "edge" | "biedge" => {
                let arrow = if keyword == "edge" { "->" } else { "<->" };
                let a = *toks
                    .get(1)
                    .ok_or(err(end_col, SyntaxErrorKind::Expected("node name")))?;
                match toks.get(2) {
                    Some(&(_, t)) if t == arrow => {}
                    Some(&(c, _)) => {
                        return Err(err(
                            c,
                            SyntaxErrorKind::Expected(if keyword == "edge" {
                                "'->'"
                            } else {
                                "'<->'"
                            }),
                        ))
                    }
                    None => {
                        return Err(err(
                            end_col,
                            SyntaxErrorKind::Expected(if keyword == "edge" {
                                "'->'"
                            } else {
                                "'<->'"
                            }),
                        ))
                    }
                }
                let b = *toks
                    .get(3)
                    .ok_or(err(end_col, SyntaxErrorKind::Expected("node name")))?;
                if let Some(&(c, t)) = toks.get(4) {
                    return Err(err(c, SyntaxErrorKind::Trailing(t.to_string())));
                }
                edges.push(EdgeLine {
                    line: line_no,
                    a,
                    b,
                    bidirected: keyword == "biedge",
                });
            }
            "option" => {
                let &(c, opt) = toks
                    .get(1)
                    .ok_or(err(end_col, SyntaxErrorKind::Expected("option name")))?;
                match opt {
                    "allow-mechanism-children" => allow_mechanism_children = true,
                    other => return Err(err(c, SyntaxErrorKind::UnknownOption(other.to_string()))),
                }
            }
            other if extra_keywords.contains(&other) => {
                let rest_start = kw_col - 1 + other.len();
                let rest = &line[rest_start..];
                let lead = rest.len() - rest.trim_start().len();
                directives.push(Directive {
                    line: line_no,
                    keyword: other.to_string(),
                    rest: rest.trim().to_string(),
                    rest_column: rest_start + lead + 1,
                });
            }
            other => {
                return Err(err(
                    kw_col,
                    SyntaxErrorKind::UnknownKeyword(other.to_string()),
                ))
            }
        }
    }

    // Edges are resolved after all declarations so that order does not matter.
    let known = |name: &str| -> bool {
        if declared.contains_key(name) {
            return true;
        }
        name.strip_prefix(MECHANISM_PREFIX)
            .and_then(|owner| declared.get(owner))
            .is_some_and(|&(_, k)| k == NodeKind::PartiallyObserved)
    };
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for e in &edges {
        for &(col, name) in [&e.a, &e.b] {
            if !known(name) {
                return Err(SyntaxError::new(
                    e.line,
                    col,
                    SyntaxErrorKind::UndeclaredNode(name.to_string()),
                ));
            }
        }
        let pair = (e.a.1.to_string(), e.b.1.to_string());
        if e.bidirected {
            bidirected.push(pair);
        } else {
            directed.push(pair);
        }
    }

    let g = MGraph::from_parts(&nodes, &directed, &bidirected, allow_mechanism_children).map_err(
        |ge| {
            // Point at the first line mentioning the offending node.
            let culprit = match &ge {
                GraphError::CycleDetected(n)
                | GraphError::DanglingProxy(n)
                | GraphError::DuplicateName(n)
                | GraphError::UnknownNode(n)
                | GraphError::SelfLoop(n)
                | GraphError::InvalidName(n)
                | GraphError::ReservedName(n) => n.clone(),
                GraphError::MechanismHasForbiddenChild { mechanism, .. } => mechanism.clone(),
            };
            let line = edges
                .iter()
                .find_map(|e| {
                    [e.a, e.b]
                        .iter()
                        .find(|(_, n)| *n == culprit || mechanism_name(n) == culprit)
                        .map(|&(c, _)| (e.line, c))
                })
                .or_else(|| declared.get(&culprit).map(|&(l, _)| (l, 1)))
                .unwrap_or((1, 1));
            SyntaxError::new(line.0, line.1, SyntaxErrorKind::Graph(ge))
        },
    )?;
    Ok((g, directives))
}

/// Canonical text form. Declared nodes keep their order; synthesized nodes and
/// masking edges are omitted.
pub fn serialize_mgraph(g: &MGraph) -> String {
    let mut out = String::new();
    for n in g.declared() {
        out.push_str(&format!("node {} {}\n", n.name, n.kind.keyword()));
    }
    for (a, b) in g.user_edges() {
        out.push_str(&format!("edge {} -> {}\n", g.name(a), g.name(b)));
    }
    for (a, b) in g.bidirected_edges() {
        out.push_str(&format!("biedge {} <-> {}\n", g.name(a), g.name(b)));
    }
    if g.mechanism_children_allowed() {
        out.push_str("option allow-mechanism-children\n");
    }
    out
}
