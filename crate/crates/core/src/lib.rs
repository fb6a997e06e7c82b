//! Core algorithms for learning constrained tabletop manipulation:
//! dense networks with exact gradients, a deterministic actor-critic
//! agent, hindsight experience replay, a lightweight physics simulator,
//! and trajectory analysis.
//!
//! The crate is `no_std` (alloc required). IO, file formats, and the
//! command line live in the companion `lob` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod analysis;
pub mod ddpg;
pub mod her;
pub mod math;
pub mod net;
pub mod sim;

mod error;

pub use error::{Error, Result};

// Re-exported so downstream crates seed and drive the exact same RNG
// implementation the core uses.
pub use rand;
pub use rand_chacha;

/// The deterministic RNG used everywhere: seekable, so checkpoints can
/// record and restore the exact stream position.
pub type DetRng = rand_chacha::ChaCha12Rng;
