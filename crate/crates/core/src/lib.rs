//! Simulation of linear-optical entanglement purification on two-photon
//! polarization states.
//!
//! The crate is layered bottom-up:
//!
//! - [`quantum`]: dense complex linear algebra for small registers (pure and
//!   mixed states, partial trace, Hermitian eigendecomposition, Kraus maps).
//! - [`channels`]: Bell states, waveplate rotations and the polarization /
//!   arrival-time decoherer.
//! - [`purification`]: the post-selected PBS parity-check protocol.
//! - [`tomography`]: count simulation, maximum-likelihood reconstruction and
//!   Monte Carlo error bars.
//! - [`analysis`]: CHSH values, the maximal Bell parameter, tangle, linear
//!   entropy and the tangle/entropy frontier.

pub mod analysis;
pub mod channels;
mod error;
pub mod purification;
pub mod rng;
pub mod tolerance;
pub mod tomography;
pub mod quantum;

pub use error::{Error, Result};
