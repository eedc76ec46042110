use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("case file has no `mpc.{0}` matrix block")]
    MissingBlock(&'static str),

    #[error("mpc.{block} row {row}: {msg}")]
    Parse {
        block: &'static str,
        row: usize,
        msg: String,
    },

    #[error("case must have exactly one slack bus, found {0}")]
    SlackCount(usize),

    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),

    #[error("bus {bus} has unsupported type code {code}")]
    UnknownBusType { bus: u32, code: i64 },

    #[error("branch {branch} references unknown bus {bus}")]
    UnknownBus { branch: usize, bus: u32 },

    #[error("branch {branch} connects bus {bus} to itself")]
    SelfLoop { branch: usize, bus: u32 },

    #[error("case has no buses or no in-service branches")]
    EmptyCase,

    #[error("in-service network is disconnected: bus {bus} is not reachable from the slack")]
    Disconnected { bus: u32 },

    #[error("branch {branch} has non-positive reactance {x}")]
    NonPositiveReactance { branch: usize, x: f64 },

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("lambda = {0} is outside the lambda >= 1 regime of the closed-form attack")]
    LambdaBelowOne(f64),

    #[error("tau = {0} must exceed 1 for the concentration bound")]
    TauNotAboveOne(f64),

    #[error("{context}: dimension mismatch, expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{0}: matrix is not symmetric")]
    NotSymmetric(&'static str),

    #[error("{0}: matrix is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("{context}: matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { context: &'static str, min_eig: f64 },

    #[error("{0}: non-finite value")]
    NonFinite(&'static str),

    #[error("quadrature did not converge after {subdivisions} subdivisions (error estimate {achieved:e})")]
    Quadrature { achieved: f64, subdivisions: usize },
}
