use thiserror::Error;

use crate::grid::GridLocation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operator {op} cannot act on {loc:?} data")]
    OperatorDomain { op: &'static str, loc: GridLocation },

    #[error("operand mismatch in {op}: {detail}")]
    Mismatch { op: &'static str, detail: String },

    #[error("sparse factorization failed: {0}")]
    LinearAlgebra(String),

    #[error("solve residual {residual:.3e} exceeds tolerance {tolerance:.1e} ({what})")]
    SolverConvergence {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("quadratic for the auxiliary multiplier has no real root (discriminant {discriminant:.6e})")]
    NoRealRoot { discriminant: f64 },

    #[error("both roots {roots:?} violate |S*B| > kappa = {kappa} (time step too large?)")]
    KappaViolation { roots: [f64; 2], kappa: f64 },

    #[error("stepper state error: {0}")]
    State(String),

    #[error("energy audit failed at step {step}: {reason}")]
    Audit { step: usize, reason: String },

    #[error("error report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
