//! Text output compared byte-for-byte against `tests/golden/*.txt`.
//! Run with `UPDATE_GOLDEN=1` to rewrite the stored files.

use std::path::{Path, PathBuf};
use std::process::Command;

const GRAPHS: [&str; 14] = [
    "obesity_mcar",
    "obesity_mar",
    "obesity_mnar",
    "crossed_masks",
    "pair_sequential",
    "pair_crossed",
    "triple_crossed",
    "attrition_side_effects",
    "attrition_dropout",
    "confounded_outcome",
    "confounded_pair",
    "mediator_mask",
    "matrix",
    "selfmask",
];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn graph(name: &str) -> String {
    root()
        .join("../core/graphs")
        .join(format!("{name}.mg"))
        .display()
        .to_string()
}

fn fixture(name: &str) -> String {
    root()
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn check(name: &str, args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_misslab"))
        .args(args)
        .output()
        .unwrap();
    if !out.status.success() {
        return Err(format!(
            "{name}: exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let got = String::from_utf8(out.stdout).unwrap();
    let path = root().join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
        return Ok(());
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if got == want {
        Ok(())
    } else {
        Err(format!(
            "{name}: output differs from {}\n--- got\n{got}--- want\n{want}",
            short(&path)
        ))
    }
}

fn short(p: &Path) -> String {
    p.strip_prefix(root()).unwrap_or(p).display().to_string()
}

fn args(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn run_all(cases: Vec<(String, Vec<String>)>) {
    let failures: Vec<String> = cases
        .iter()
        .filter_map(|(n, a)| check(n, a).err())
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn classify_every_graph() {
    run_all(
        GRAPHS
            .iter()
            .map(|g| (format!("classify_{g}"), args(&["classify", &graph(g)])))
            .collect(),
    );
}

#[test]
fn implications_of_every_graph() {
    run_all(
        GRAPHS
            .iter()
            .map(|g| {
                (
                    format!("implications_{g}"),
                    args(&["implications", &graph(g)]),
                )
            })
            .collect(),
    );
}

#[test]
fn recovery() {
    let cases = [
        ("recover_obesity_mar", "obesity_mar", "P(G,O,A)"),
        ("recover_obesity_mar_outcome", "obesity_mar", "P(O)"),
        ("recover_obesity_mnar", "obesity_mnar", "P(A,G,O)"),
        ("recover_pair_sequential", "pair_sequential", "P(X,Y)"),
        ("recover_pair_crossed", "pair_crossed", "P(X,Y)"),
        ("recover_triple_crossed", "triple_crossed", "P(X,Y,Z)"),
        ("recover_selfmask", "selfmask", "P(I)"),
        ("recover_matrix", "matrix", "P(I)"),
    ];
    let mut all: Vec<_> = cases
        .iter()
        .map(|(n, g, q)| (n.to_string(), args(&["recover", &graph(g), "--query", q])))
        .collect();
    all.push((
        "factorizations_obesity_mar".into(),
        args(&[
            "recover",
            &graph("obesity_mar"),
            "--query",
            "P(G,O,A)",
            "--all-factorizations",
        ]),
    ));
    run_all(all);
}

#[test]
fn causal_recovery() {
    run_all(vec![
        (
            "causal_attrition_side_effects".into(),
            args(&[
                "recover-causal",
                &graph("attrition_side_effects"),
                "--do",
                "T_t,T_t1",
                "--outcome",
                "O_t1",
            ]),
        ),
        (
            "causal_attrition_dropout".into(),
            args(&[
                "recover-causal",
                &graph("attrition_dropout"),
                "--do",
                "T_t,T_t1",
                "--outcome",
                "O_t1",
            ]),
        ),
        (
            "causal_confounded_outcome".into(),
            args(&[
                "recover-causal",
                &graph("confounded_outcome"),
                "--do",
                "Z",
                "--outcome",
                "Y",
            ]),
        ),
    ]);
}

#[test]
fn suites_and_separation() {
    run_all(vec![
        (
            "mar_tests_triple_crossed".into(),
            args(&["mar-tests", &graph("triple_crossed")]),
        ),
        (
            "mar_tests_obesity_mnar".into(),
            args(&["mar-tests", &graph("obesity_mnar")]),
        ),
        (
            "mcar_tests_obesity_mar".into(),
            args(&["mcar-tests", &graph("obesity_mar")]),
        ),
        (
            "dsep_obesity_mar".into(),
            args(&[
                "dsep",
                &graph("obesity_mar"),
                "--x",
                "G",
                "--y",
                "R_O",
                "--z",
                "A",
            ]),
        ),
        (
            "dsep_obesity_mnar".into(),
            args(&[
                "dsep",
                &graph("obesity_mnar"),
                "--x",
                "G",
                "--y",
                "R_O",
                "--z",
                "A",
            ]),
        ),
    ]);
}

#[test]
fn data_commands() {
    let model = fixture("survey.model");
    let data = fixture("survey.csv");
    run_all(vec![
        (
            "simulate_survey".into(),
            args(&["simulate", &model, "--n", "12", "--seed", "7"]),
        ),
        (
            "estimate_survey".into(),
            args(&[
                "estimate",
                &graph("obesity_mar"),
                &data,
                "--query",
                "P(O|G)",
            ]),
        ),
        (
            "test_survey_mcar".into(),
            args(&["test", &graph("obesity_mar"), &data, "--suite", "mcar"]),
        ),
        (
            "test_survey_graph".into(),
            args(&["test", &graph("obesity_mar"), &data, "--suite", "graph"]),
        ),
    ]);
}
