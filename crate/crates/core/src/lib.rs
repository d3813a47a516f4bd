//! Maximum likelihood estimation and kriging for Gaussian random fields with
//! Matérn covariance, on dense or tile low-rank (TLR) compressed covariance
//! matrices.
//!
//! The pipeline is:
//!
//! * [`geometry`]: locations and distances (Euclidean or great-circle),
//! * [`kernels`]: the Matérn kernel, `Gamma` and `K_nu`,
//! * [`tile`]: tiled symmetric storage with dense diagonal tiles and dense or
//!   low-rank `U V^T` off-diagonal tiles,
//! * [`compression`]: fixed-accuracy truncation of tiles and of low-rank sums,
//! * [`linalg`]: tile Cholesky (dense and TLR), triangular solves, log-determinant,
//! * [`stats`]: log-likelihood, synthetic data and the bounded Nelder–Mead fit,
//! * [`predict`]: conditional-mean prediction and MSE scoring,
//! * [`io`] and [`bench`]: CSV datasets, region splitting and timing reports.

pub mod bench;
pub mod compression;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod predict;
pub mod stats;
pub mod tile;

pub use error::{Error, Result};
pub use geometry::{generate_locations, Location, LocationSet, Metric};
pub use kernels::{Matern, MaternParams};
pub use linalg::CholeskyFactor;
pub use tile::{Mode, TileGrid, TileMatrix};
