//! Generalized Markov modulated Poisson processes: simulation and exact
//! Bayesian inference by uniformization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod ctmc;
pub mod likelihood;
pub mod mcmc;
pub mod quad;
pub mod scenarios;
pub mod simulate;
pub mod epidemic;
pub mod error;
pub mod intensity;
pub mod io;
pub mod model;
pub mod par;
pub mod special;

pub use error::{Error, Result};
