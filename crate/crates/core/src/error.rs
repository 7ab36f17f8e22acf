use alloc::string::String;
use core::fmt;

use crate::fock::Subsystem;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Truncation must allow at least one photon per mode.
    InvalidTruncation(usize),
    InvalidSubsystem {
        subsystem: Subsystem,
        reason: &'static str,
    },
    PhotonNumberTooLarge {
        requested: usize,
        truncation: usize,
    },
    OddPhotonNumber(usize),
    NegativeSqueezing(f64),
    NegativeRate(f64),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    ParamCount {
        expected: usize,
        found: usize,
    },
    OutOfBounds {
        index: usize,
        value: f64,
    },
    /// A density operator or derived quantity lost positivity.
    NotPositive(f64),
    NotHermitian(f64),
    BadTrace(f64),
    ZeroNorm,
    OracleTooLarge {
        dim: usize,
        limit: usize,
    },
    InvalidConfig(String),
    NonFinite,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidTruncation(n) => write!(f, "truncation must be at least 1, got {n}"),
            Error::InvalidSubsystem { subsystem, reason } => {
                write!(f, "invalid subsystem {subsystem:?}: {reason}")
            }
            Error::PhotonNumberTooLarge {
                requested,
                truncation,
            } => write!(
                f,
                "photon number {requested} exceeds the per-mode truncation {truncation}"
            ),
            Error::OddPhotonNumber(n) => write!(f, "photon number must be even, got {n}"),
            Error::NegativeSqueezing(r) => write!(f, "squeezing parameter must be >= 0, got {r}"),
            Error::NegativeRate(k) => write!(f, "noise strength must be >= 0, got {k}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ParamCount { expected, found } => {
                write!(f, "expected {expected} circuit parameters, found {found}")
            }
            Error::OutOfBounds { index, value } => {
                write!(f, "parameter {index} = {value} lies outside its bounds")
            }
            Error::NotPositive(v) => {
                write!(f, "matrix is not positive semidefinite (eigenvalue {v:e})")
            }
            Error::NotHermitian(v) => write!(f, "matrix is not Hermitian (deviation {v:e})"),
            Error::BadTrace(t) => write!(f, "density operator trace is {t}, expected 1"),
            Error::ZeroNorm => write!(f, "state vector has zero norm"),
            Error::OracleTooLarge { dim, limit } => {
                write!(f, "oracle limited to dimension {limit}, got {dim}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFinite => write!(f, "encountered a non-finite value"),
        }
    }
}

impl core::error::Error for Error {}
