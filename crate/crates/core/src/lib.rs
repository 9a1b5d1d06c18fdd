//! Quantized distributed online projection-free optimization.
//!
//! Agents on a time-varying network each see a private convex loss per round,
//! exchange randomly quantized states and gradients with their neighbors,
//! track the network-wide gradient, and move by Frank-Wolfe steps that only
//! need a linear minimization oracle over the constraint set.
//!
//! - [`problem`]: constraint sets, oracles and loss streams
//! - [`quantizer`]: unbiased random quantizers and bit accounting
//! - [`network`]: doubly stochastic graph sequences and mixing constants
//! - [`engine`]: the round-by-round algorithm and its trace
//! - [`metrics`]: comparators, dynamic regret, variations, and bound evaluation

pub mod assumptions;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod problem;
pub mod quantizer;
pub mod rng;

pub use error::{Error, Result};
