//! Digital (quantize-and-transmit) and analog (over-the-air computation)
//! uplinks for federated learning over Rayleigh fading channels, together
//! with the closed-form convergence bounds that describe them.
//!
//! The crate is `no_std` and needs only `alloc`. Everything here is a pure
//! function of its inputs and an explicitly passed random number generator;
//! file formats, configuration and the command line live in the `fedwire`
//! companion crate.
//!
//! Module map:
//!
//! * [`task`], [`fl`], [`sampling`]: the federated optimisation problem,
//!   exact local gradients, participant sampling and the model update.
//! * [`channel`]: fading draws with imperfect CSI, capacity and outage laws.
//! * [`digital`]: stochastic quantisation, fixed-rate transmission and the
//!   debiased aggregate.
//! * [`analog`]: truncated channel inversion and AirComp aggregation.
//! * [`bounds`], [`special`], [`diagnostics`]: optimality-gap bounds, the
//!   exponential integral they need, and the variance decomposition used to
//!   check simulations against them.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analog;
pub mod bounds;
pub mod channel;
pub mod diagnostics;
pub mod digital;
mod error;
pub mod fl;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod task;

pub use error::{Error, Result};
