//! Desk-scale score-based diffusion sampling with discriminator guidance.
//!
//! The crate trains a small score network and a time-conditioned
//! discriminator on analytically tractable Gaussian-mixture targets, runs
//! guided/unguided/rejection samplers, and measures drift correction, error
//! reduction and acceptance-rate gains against closed-form oracles.
//!
//! Module map:
//! - [`sde`]: forward diffusion schedules (VP/VE families), perturbation
//!   kernels, forward sampling.
//! - [`oracle`]: Gaussian-mixture densities, scores, perturbed marginals,
//!   the optimal discriminator and exact density ratios.
//! - [`nets`]: small MLPs with manual backprop, Adam, the score-matching
//!   and discriminator BCE training loops, parameter serialization.
//! - [`sampler`]: reverse SDE, probability-flow ODE and stochastic-churn
//!   samplers with pluggable score/guidance sources; rejection sampling.
//! - [`diagnostics`]: Wasserstein-1 metrics, error decomposition,
//!   log-density-ratio traces and quality-by-NFE sweeps.
//! - [`csvio`]: the CSV surface shared by the CLI and the library.

#![forbid(unsafe_code)]

pub mod csvio;
pub mod diagnostics;
mod error;
pub mod nets;
pub mod oracle;
pub mod sampler;
pub mod sde;

pub use error::{Error, Result};
