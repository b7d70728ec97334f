//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest-point iteration did not converge after {iterations} iterations (|grad| = {gradient_norm:.3e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("closest-point projection is ambiguous: two minima at comparable distance")]
    AmbiguousProjection,

    #[error("empty sampling region")]
    EmptyRegion,

    #[error("triangle {triangle}: h_T^2 kappa_T^2 = {value:.3e} exceeds bound {bound:.3e}")]
    SuffViolated { triangle: usize, value: f64, bound: f64 },

    #[error("projection of new vertex failed during refinement: {source}")]
    ProjectionFailed { #[source] source: Box<Error> },

    #[error("conformity closure exceeded recursion bound {bound}")]
    NonTermination { bound: usize },

    #[error("triangle {triangle} is degenerate (det G_X = {det:.3e})")]
    DegenerateTriangle { triangle: usize, det: f64 },

    #[error("triangle {triangle}: facet normal opposes surface normal (nu_h . nu = {dot:.3e}); mesh too coarse for the curvature")]
    NormalFlip { triangle: usize, dot: f64 },

    #[error("mesh edge graph is disconnected; distance proxy undefined")]
    DisconnectedMesh,

    #[error("grading budget exceeded after {sweeps} sweeps; {remaining} triangles still violate criteria")]
    BudgetExceeded { sweeps: usize, remaining: usize },

    #[error("CG did not reach tolerance in {iterations} iterations (relative residual {residual:.3e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
