use crate::num::ode::OdeError;
use crate::num::quad::QuadError;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite damping value at t = {t}")]
    NonFiniteValue { t: f64 },
    #[error("grid too short to classify tail behaviour: {0}")]
    GridTooShort(String),
    #[error("time order violated: s = {s} > t = {t}")]
    OrderViolation { t: f64, s: f64 },
    #[error("hypothesis not satisfied: {0}")]
    HypothesisNotSatisfied(String),
    #[error("exp(-∫b) is not integrable on [0, ∞) (partial integral {partial:e} at t = {t:e})")]
    BetaNotIntegrable { partial: f64, t: f64 },
    #[error("η is not monotone on [{a}, {b}]")]
    NonMonotoneEta { a: f64, b: f64 },
    #[error("integrator step underflow at t = {t} (xi = {xi})")]
    StepUnderflow { t: f64, xi: f64 },
    #[error("sample (t={t}, s={s}, xi={xi}) lies outside the domain of {bound}")]
    DomainViolation { bound: String, t: f64, s: f64, xi: f64 },
    #[error("frequency quadrature did not converge: {0}")]
    QuadratureDivergence(String),
    #[error("fit window is pre-asymptotic (residual {residual:.3e})")]
    WindowTooEarly { residual: f64 },
    #[error("time step {dt} violates the CFL bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("box budget exceeded: K + t = {reach} reaches the half-width {half_width}")]
    BoxBudgetExceeded { reach: f64, half_width: f64 },
    #[error("source history does not cover [0, {t}] finely enough: {detail}")]
    HistoryGap { t: f64, detail: String },
    #[error("Picard iteration diverged at iterate {iterate} (X-norm {norm:e})")]
    IterationDiverged { iterate: usize, norm: f64 },
    #[error("weight hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid configuration at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
    #[error("cannot access `{path}`: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}
