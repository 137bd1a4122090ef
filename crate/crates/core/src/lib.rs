//! Random-pairing maximum likelihood estimation of Rasch item parameters.
//!
//! Each user's responses are split into disjoint random pairs; pairs with
//! disagreeing answers become Bradley-Terry-Luce comparisons whose likelihood
//! does not involve the user parameters. The crate covers simulation,
//! pairing, the BTL solvers, the Laplacian quantities that govern estimation
//! error, plug-in confidence intervals and the experiment harness.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod inference;
pub mod laplacian;
pub mod logistic;
pub mod lsat;
pub mod model;
pub mod normal;
pub mod pairing;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
