//! Semi-active suspension toolkit.
//!
//! Vehicle models (quarter car and multi-axle rigid body), road inputs,
//! the passive / ADD / PDD / saturation-aware H-infinity damper strategies,
//! fixed-step simulation and ride-comfort metrics. The [`lti`] module holds
//! the dense continuous-time machinery (Riccati equations, H-infinity norm,
//! lower LFT, output-feedback synthesis) the H-infinity strategy is built on.

pub mod controllers;
pub mod error;
pub mod lti;
pub mod metrics;
pub mod road;
pub mod sim;
pub mod vehicle;

pub use error::{Error, Result};
