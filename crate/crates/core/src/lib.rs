//! Recurrent per-packet intrusion detection workbench.
//!
//! The crate trains a stacked-LSTM flow classifier ([`classifier`]), attacks
//! it with constrained gradient methods ([`attacks`]), scores its robustness
//! ([`robustness`]), explains its decisions ([`explain`]) and hardens it
//! ([`defenses`]). Everything is 64-bit, single-flow-at-a-time and
//! deterministic under an explicit seed.

pub mod error;
pub mod flowdata;
pub mod rnn;
pub mod classifier;
pub mod attacks;
pub mod robustness;
pub mod explain;
pub mod defenses;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
