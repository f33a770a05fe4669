//! Korevaar-Schoen energy calculus on sampled metric measure spaces.
//!
//! Domains are finite weighted point clouds, targets are geodesic spaces
//! (mostly CAT(0)), and maps assign a target point to every sample.

pub mod chart;
pub mod dirichlet;
pub mod energy;
pub mod error;
pub mod map;
pub mod rng;
pub mod space;
pub mod seminorm;
pub mod synth;
pub mod target;

pub use error::{Error, Result};
