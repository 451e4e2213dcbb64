use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {constraint}")]
    InvalidParams {
        field: &'static str,
        constraint: String,
    },

    #[error("initial state has zero norm")]
    ZeroState,

    #[error("custom initial state needs 6 amplitudes, got {0}")]
    WrongDimension(usize),

    #[error("coefficient integration produced a non-finite value at t = {t}")]
    CoefficientBlowUp { t: f64 },

    #[error("trajectory {index} failed at t = {t}: {reason}")]
    TrajectoryFailure {
        index: u64,
        t: f64,
        reason: &'static str,
    },

    #[error("{failed} of {total} trajectories failed (limit 0.1%); first failure: {first}")]
    FailureRate {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("Hermitian eigensolver did not converge")]
    EigenSolver,

    #[error("P-grid oracle limited to {max} grid points, requested {points}")]
    GridTooLarge { points: usize, max: usize },

    #[error("master equation did not reach stationarity for kappa = {kappa}: |d rho/dt| = {residual:e} at t = {t}")]
    NonConvergence { kappa: f64, t: f64, residual: f64 },
}
