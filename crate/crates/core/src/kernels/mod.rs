//! Matérn covariance and the special functions it needs.

mod matern;
mod special;

pub use matern::{matern, Matern, MaternParams, MAX_SMOOTHNESS};
pub use special::{bessel_k, gamma_fn, BesselK};
