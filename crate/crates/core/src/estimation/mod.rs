//! Numbers from estimands: observed-data tables (exact or from data),
//! estimand evaluation, matrix recovery and independence tests.

mod data;
mod eval;
mod gtest;
mod matrix;
mod table;

use thiserror::Error;

pub use data::{empirical_distribution, observed_columns, Column, Dataset, Domains, MISSING_CODE};
pub use eval::evaluate;
pub use gtest::{ci_violation, run_test, CiSpec, TestResult, MIN_EXPECTED};
pub use matrix::{solve_matrix_recovery, CONDITION_LIMIT};
pub use table::{ObservedDistribution, Source, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("column {column}: {detail}")]
    DomainMismatch { column: String, detail: String },
    #[error("dataset has no column {0}")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("conditioning event has probability zero: {0}")]
    ZeroProbabilityConditioning(String),
    #[error("variable {0} is not bound")]
    UnboundVariable(String),
    #[error("{0} is not an observed-data column")]
    NotObservable(String),
    #[error("cannot evaluate the interventional atom {0}")]
    Interventional(String),
    #[error("matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("solution entry {value} lies outside [0, 1]")]
    InfeasibleSolution { value: f64 },
    #[error("expected counts too small in every stratum")]
    InsufficientData,
    #[error("a test needs an empirical distribution with a sample size")]
    NeedsCounts,
}
