use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error in `{subexpr}` at point {point:?}: {reason}")]
    Domain {
        subexpr: String,
        point: Vec<f64>,
        reason: String,
    },
    #[error("metric is numerically singular at {point:?} (|det| = {det:e})")]
    SingularMetric { point: Vec<f64>, det: f64 },
    #[error("supplied connection is not statistical: lowered skewness asymmetry {deviation:e} exceeds 1e-9")]
    NotStatistical { deviation: f64 },
    #[error("bundle point lies outside the admissible region: 1 + q*tau = {value:e} <= 1e-10")]
    OutsideBMq { value: f64 },
    #[error("geodesic left the admissible region at t = {t}")]
    LeftBMq { t: f64 },
    #[error("geodesic step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("degenerate 2-plane: squared area {q:e} <= 1e-12")]
    DegeneratePlane { q: f64 },
    #[error("closed-form sectional curvature requires g-orthonormal pure lifts: {reason}")]
    NotOrthonormal { reason: String },
    #[error("orthonormal lifted frame requires a nonzero fiber vector")]
    ZeroFiberVector,
    #[error("operation requires a Riemannian (positive-definite) metric")]
    PseudoRiemannianUnsupported,
    #[error("spec document error at `{path}`: {reason}")]
    Schema { path: String, reason: String },
    #[error("symmetric slot mismatch between {a} and {b}")]
    Symmetry { a: String, b: String },
}

pub type Result<T> = std::result::Result<T, GeomError>;
