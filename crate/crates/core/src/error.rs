use thiserror::Error;

use crate::ks::GroundState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field length {found} does not match grid node count {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid doping profile: {0}")]
    InvalidProfile(String),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("SCF did not converge after {iterations} iterations (residual {residual:e})")]
    ScfNotConverged {
        iterations: usize,
        residual: f64,
        last: Box<GroundState>,
    },
    #[error("state holds {available} eigenpairs, {required} required")]
    InsufficientEigenpairs { required: usize, available: usize },
    #[error("no feasible increment found after {0} draws")]
    InfeasibleIncrement(usize),
    #[error("search space of {0} configurations is too large for enumeration")]
    SearchSpaceTooLarge(u128),
    #[error("propagation failed: {0}")]
    Propagation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::GridMismatch { expected, found })
    }
}
