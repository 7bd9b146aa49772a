//! Multi-agent formation tracking with scheduled position fixes.
//!
//! Agents follow noisy first-order dynamics, dead-reckon their position
//! between fixes, estimate the formation centroid through consensus and
//! steer with a distance-gradient law. A scheduler grants one exact fix per
//! slot according to Age or Value of Information.

pub mod config;
pub mod controller;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod formation;
pub mod metrics;
pub mod report;
pub mod scheduler;

pub use error::{Error, Result};
