//! Bayesian estimation of a steady, divergence-free flow on the unit torus from
//! point observations of a passive scalar it advects.
//!
//! The forward model is a spectral Galerkin discretisation of
//! `∂θ/∂t + v·∇θ = κΔθ` stepped with Crank–Nicolson; gradients of the data
//! misfit come from the exact discrete adjoint. Posterior sampling uses
//! function-space MCMC kernels (pCN, independence, MALA, HMC) preconditioned by a
//! Kraichnan-spectrum Gaussian prior.

pub mod adjoint;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod inference;
pub mod io;
pub mod model;
pub mod samplers;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
