use thiserror::Error;

/// Errors produced by the transport solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unbalanced marginals: source mass {source_mass}, target mass {target_mass}")]
    UnbalancedMarginals { source_mass: f64, target_mass: f64 },

    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cost matrix has zero maximum entry and cannot be normalized")]
    DegenerateCost,

    #[error("transported mass {mass} outside [0, {max}]")]
    InvalidMass { mass: f64, max: f64 },

    #[error("corner penalty {penalty} must exceed the maximum cost {max_cost}")]
    InvalidPenalty { penalty: f64, max_cost: f64 },

    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(String),

    #[error("initial plan is infeasible: {0}")]
    InfeasibleInit(String),

    #[error("transported-row count {rows} is not an integer (prior {prior}, noise {noise}, {n} unlabeled points)")]
    InfeasibleMassGrid {
        rows: f64,
        prior: f64,
        noise: f64,
        n: usize,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("empty input file")]
    EmptyFile,

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver exceeded {0} pivots")]
    IterationLimit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
