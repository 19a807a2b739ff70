//! Numerically stable special-function kernels: log-factorials, Hermite polynomials at the
//! origin, and Wigner rotation matrix elements for large `j`.

mod factorial;
mod halfint;
mod signed_log;
mod wigner;

pub use factorial::{hermite_at_zero, log_binomial, log_factorial};
pub use halfint::HalfInt;
pub use signed_log::SignedLog;
pub use wigner::{
    wigner_d, wigner_d_block, wigner_d_block_with_limits, BlockLimits, WignerBlock, WignerColumns, DEFAULT_BLOCK_BYTES,
};
