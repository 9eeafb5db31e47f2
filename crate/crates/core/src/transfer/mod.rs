//! Grid functions and the twisted transfer operator.

mod grid;
mod lasota;
mod operator;
mod scheme;

pub use grid::{cell_of, linear_stencil, midpoint, GridFunction, Lookup};
pub use lasota::{empirical_ly_check, ly_check_with, ly_constants, LyCheck, LyConstants, LY_SLACK, MIN_PIECE_IMAGE};
pub use operator::{
    apply_twisted, apply_twisted_fn, apply_twisted_with, invariant_density, invariant_density_with, OneStep,
    TwistedOperator, DENSITY_TOL,
};
pub use scheme::{
    h_partition_count, hl_average, i_partition_count, norm_decay_experiment, random_bv_probe, GammaChain,
    NormDecayReport, PhiFit, ProbeRatio, SchemeConstants, DEFAULT_B0, RANDOM_PROBES,
};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::mapspec::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("grid of {cells} cells is too coarse, need at least {needed}")]
    GridTooCoarse { cells: usize, needed: usize },
    #[error("power iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("smoothness piece with image length {length:e}")]
    DegenerateImage { length: f64 },
    #[error("|b| = {b} below b0 = {b0}")]
    FrequencyTooSmall { b: f64, b0: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
