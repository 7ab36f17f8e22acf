//! Variational preparation of metrologically useful two-mode photonic states.
//!
//! The crate simulates two truncated bosonic modes, optionally coupled to
//! one two-level emitter each, driven by layered parametrized circuits
//! (emitter or Kerr non-linearities interleaved with tunneling). Prepared
//! states are sent through a Mach–Zehnder phase encoder, optionally
//! degraded by photon loss and dephasing, and scored by quantum and
//! classical Fisher information. A derivative-free optimizer tunes the
//! preparation circuit for the quantum Fisher information and a second
//! circuit for the photon-counting Fisher information.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and thread pools live in the `qmetro` crate.

#![no_std]

extern crate alloc;

pub mod circuits;
pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod optimize;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
