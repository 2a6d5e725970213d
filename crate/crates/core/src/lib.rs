//! Task-agnostic data generation for offline reinforcement learning.
//!
//! The library covers the full loop on a desk-scale point-mass environment:
//!
//! 1. train a diverse policy ensemble without task rewards, by maximizing
//!    the minimum pairwise Wasserstein-1 distance between the policies'
//!    discounted occupancy measures;
//! 2. generate one experience buffer per policy;
//! 3. when the task reward arrives, relabel every buffer and select the one
//!    with the highest average return;
//! 4. train a policy offline inside an uncertainty-penalized non-parametric
//!    model of the selected buffer;
//! 5. check the resulting return gaps against the occupancy-distance bounds
//!    that motivate the whole pipeline (telescoping identity, gap/distance
//!    rank relationships, worst-case regret of the ensemble).

pub mod cem;
pub mod diversity;
pub mod env;
pub mod error;
pub mod finite;
pub mod io;
pub mod model;
pub mod offline;
pub mod pipeline;
pub mod planner;
pub mod plot;
pub mod policy;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
