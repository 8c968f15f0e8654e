//! Kicked Ising simulation of a central system coupled to a near spin
//! environment, which is in turn coupled to a far spin environment.
//!
//! - [`model`]: qubit layout, couplings and topology presets
//! - [`engine`]: state vectors and the Floquet map
//! - [`measures`]: reduced density matrices, purity, concurrence
//! - [`experiments`]: decoherence protocols and sweep tables

pub mod engine;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod model;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
