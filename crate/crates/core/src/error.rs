use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stencil order q = {q} is outside the supported range {min}..={max}")]
    StencilOrder { q: usize, min: usize, max: usize },

    #[error("sample count {got} does not match stencil order q = {q} (expected {})", .q + 1)]
    SampleCount { q: usize, got: usize },

    #[error("invalid theta limits: {0}")]
    InvalidLimits(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("non-finite value {value} from {what} at node {index} (t = {t})")]
    NonFiniteSample { what: &'static str, index: usize, t: f64, value: f64 },

    #[error("Gauss-Hermite rule with {m} points is outside the supported range 1..=64")]
    HermitePoints { m: usize },

    #[error("variance must be positive and finite, got {0}")]
    Variance(f64),

    #[error("non-finite integrand value {value} at x = {x}")]
    NonFiniteExpectation { x: f64, value: f64 },

    #[error("invalid space grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} disagrees with a central difference at {at}: analytic {analytic}, numeric {numeric}")]
    InconsistentDerivative { what: &'static str, at: String, analytic: f64, numeric: f64 },

    #[error("non-finite {what} value at level {level}, x = {x}")]
    NonFiniteField { what: &'static str, level: usize, x: f64 },

    #[error("fixed-point iteration for y did not converge in {iters} iterations at level {level}, x = {x}")]
    FixedPointDiverged { level: usize, x: f64, iters: usize },

    #[error("z-equation is singular at level {level}, x = {x}: step size too large")]
    SingularZEquation { level: usize, x: f64 },

    #[error("the problem has no exact solution, required for {0}")]
    MissingExactSolution(&'static str),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("cannot parse scheme `{0}` (expected cn, ada<q> or theta:<value>)")]
    UnknownScheme(String),

    #[error("invalid study: {0}")]
    InvalidStudy(String),

    #[error("invalid rate-fit data: {0}")]
    RateData(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
