//! Tile Cholesky factorization, triangular solves and log-determinants.

pub mod blas;
mod cholesky;
mod solve;

pub use cholesky::{cholesky, dense_cholesky, potrf_tile, tlr_cholesky, CholeskyFactor};
pub use solve::{quadratic_form, solve_cholesky};
