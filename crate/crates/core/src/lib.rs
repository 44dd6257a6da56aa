//! Exact inference, Markov chain samplers and phase certificates for the
//! conditional laws of noisy spin systems.
//!
//! The central object is a space-time field of ±1 spins observed through
//! noisy nearest-neighbour products. Conditioned on the signal outside a
//! finite window, the posterior on the window is a random-bond Ising model;
//! the modules here compute it exactly ([`exact`]), sample it ([`mcmc`]),
//! and certify its low- and high-noise behaviour ([`peierls`],
//! [`dobrushin`]). [`entropy`] holds exact information computations for
//! small hidden Markov models and [`crf`] the hidden random field variants.

pub mod crf;
pub mod dobrushin;
pub mod entropy;
pub mod error;
pub mod exact;
pub mod ising;
pub mod mcmc;
pub mod model;
pub mod peierls;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Coupling, LatticeWindow, ModelParams, Site, SpinBits, SpinField};
pub use rng::SeedSpec;
