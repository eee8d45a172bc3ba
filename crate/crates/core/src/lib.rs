//! Optimal multidimensional antithetic variates.
//!
//! A standard Gaussian vector `ξ` and its image `Aξ` under an orthogonal
//! matrix `A` have the same law, so `(f(ξ) + f(Aξ))/2` is an unbiased
//! estimator of `E[f(ξ)]` whose variance is `(Var f + Cov(f(ξ), f(Aξ)))/2`.
//! This crate searches for the `A` minimising that covariance by stochastic
//! annealing on the rotation group and prices with it, either with a frozen
//! matrix or while the matrix is still being tuned.

pub mod anneal;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod lie;
pub mod payoff;
pub mod sampling;

pub use error::{Error, Result};
