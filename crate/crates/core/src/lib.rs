//! Deterministic federated-learning simulation engine.
//!
//! Implements a full desk-scale FL pipeline: a dense neural-network engine,
//! dataset synthesis and non-IID partitioning, model- and data-poisoning
//! attacks, five byzantine-robust baseline aggregators, and a
//! contrastive-ensemble filtering defense, all reproducible from a single
//! experiment seed.

pub mod attacks;
pub mod data;
pub mod defenses;
pub mod error;
pub mod federation;
pub mod flguard;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Result, SimError};
pub use linalg::Matrix;
pub use nn::{ModelParameters, UpdateVector};
