//! Expected value of perfect and partial perfect information for finite
//! decision problems.
//!
//! The crate provides the classical nested Monte Carlo estimators alongside
//! unbiased randomized multilevel estimators (single-term and coupled-sum),
//! a Gaussian linear model with a closed-form answer for checking them, and a
//! harness that runs replicated convergence studies and writes CSV.

pub mod analytic;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod levels;
pub mod model;
pub mod rng;

pub use analytic::{analytic_evpi, analytic_evppi, make_toy_model, GaussianLinearModel, ToyConfig, ToyModel};
pub use error::{Error, Result};
pub use estimators::{EstimateResult, EvppiConfig, Variant};
pub use levels::{LevelDistribution, LevelLaw};
pub use model::{DecisionModel, FactoredSampler, PriorSampler, Split};
pub use rng::RngStream;
