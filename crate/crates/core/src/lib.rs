//! Adaptive process-noise estimation for Kalman filters.
//!
//! Covariance matching fused with state noise compensation (ASNC) and dynamic model
//! compensation (ADMC), together with the fixed-noise, covariance-matching and IMM
//! baselines they are benchmarked against, and a Monte-Carlo harness for two scenarios.

pub mod adaptive;
pub mod baselines;
pub mod error;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod process_noise;
pub mod scenarios;

pub use error::{Error, Result};
