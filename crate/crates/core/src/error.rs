use thiserror::Error;

use crate::field::BoundaryClass;

/// Errors raised by the library layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid resolution n = {0} (need n >= 4)")]
    InvalidResolution(usize),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("operation not supported for boundary class {0:?}")]
    UnsupportedClass(BoundaryClass),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("array shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },
    #[error("non-finite value in field data")]
    NonFinite,
    #[error("kernel evaluated at a singular point (r = {0})")]
    SingularPoint(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("compatibility violated: {0}")]
    CompatibilityViolation(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("point is off the constraint manifold (residual {0:e})")]
    OffManifold(f64),
    #[error("constraint gradients are degenerate (Gram condition number {0:e})")]
    DegenerateConstraints(f64),
    #[error("retraction did not converge (residual {0:e})")]
    RetractionFailure(f64),
    #[error("cannot place disjoint supports: {0}")]
    PackingFailure(String),
    #[error("bump is not localized enough: {0}")]
    LocalizationFailure(String),
    #[error("genus certificate failed: {0}")]
    CertificateFailure(String),
    #[error("charge profile is not symmetric under the requested reflection (defect {0:e})")]
    SymmetryViolation(f64),
    #[error("exponent r = {r} outside admissible window ({lo}, {hi})")]
    InvalidExponent { r: f64, lo: f64, hi: f64 },
    #[error("alpha = {alpha} is infeasible for q in [{q_min}, {q_max}]")]
    Infeasible { alpha: f64, q_min: f64, q_max: f64 },
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("energy ordering violated: ground J = {ground}, excited J = {excited}")]
    OrderingViolation { ground: f64, excited: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
