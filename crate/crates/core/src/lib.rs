//! Plackett-Luce likelihoods for partitioned preferences.
//!
//! The crate covers the exact enumeration oracle, a one-dimensional quadrature
//! for the likelihood and its gradient, baseline ranking losses, small trainable
//! scorers, a synthetic data generator, an XMLC sparse-format reader and the
//! usual ranking metrics.

pub mod data;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod numeric;
pub mod pl;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use pl::{FullRanking, ItemId, PartitionedPreference, UtilityScores};
pub use quadrature::{Centering, ErrorBudget, GradientBuffer, IntegrationConfig, Integrator};
