//! Simulation library for the multi-armed sampling problem.
//!
//! An agent repeatedly pulls one of k arms and observes a noisy reward; its
//! goal is to sample arms according to the softmax of the mean rewards
//! rather than to maximize reward. The crate provides environments and
//! realizations, sampling policies (Active Sampling with Exploration and
//! baselines), exact regret functionals, executable checks of the known
//! bounds, and a configuration-driven experiment runner.

pub mod environment;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod regret;
pub mod rng;
pub mod simplex;
pub mod theory;

pub use error::{Error, Result};
