//! Imprecise probabilities from small multivariate data sets.
//!
//! Hierarchical Bayesian multimodel inference over marginal and copula
//! families produces an ensemble of candidate joint densities. A single
//! Monte Carlo run from an optimal mixture density is then reweighted to
//! every candidate, so the ensemble can be propagated through an expensive
//! model at the cost of one simulation.

pub mod bayes;
pub mod copula;
pub mod error;
pub mod hierarchy;
pub mod marginal;
pub mod models;
pub mod pipeline;
pub mod propagation;
pub mod quad;
pub mod rng;
pub mod special;
pub mod vine;

pub use copula::{CopulaFamily, CopulaSpec};
pub use error::{Error, Result};
pub use marginal::{MarginalFamily, MarginalSpec};
