//! Differential data analysis for recommender systems.
//!
//! Each user's training data is ranked by an attribute and cut into chunks;
//! removing one chunk at a time and retraining measures how much every chunk
//! contributes to recommendation accuracy. The standardized results drive
//! uneven suppression, fake-data replacement and data reduction.

pub mod attributes;
pub mod dataset;
pub mod diffscan;
pub mod error;
pub mod geo;
pub mod metrics;
pub mod obfuscate;
pub mod recommend;
pub mod seed;

pub use error::{Error, Result};
pub use seed::Seed;
