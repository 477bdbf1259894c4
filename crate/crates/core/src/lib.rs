//! Copula-based Granger-causality testing for bivariate Markov time series.

pub mod copula;
pub mod error;
pub mod gctest;
pub mod linear;
pub mod marginals;
pub mod mvine;
pub mod optim;
pub mod rng;
pub mod simstudy;
pub mod special;
pub mod stats;
pub mod tsprep;

pub use error::{Error, Result};
