//! Numerical laboratory for the bare time-dependent Schrödinger equation and
//! the questions usually asked of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`state`]: grids, wavefunctions, potentials and Hilbert-space basics.
//! * [`evolution`]: Crank–Nicolson propagation and stationary eigenpairs.
//! * [`madelung`]: polar decomposition `ψ = λ·exp(iΦ/ħ)`, quantum potential
//!   and the two real field equations checked as residuals.
//! * [`classical`]: symplectic trajectories, Lagrangian action and the
//!   Hamilton–Jacobi residual.
//! * [`polarization`]: Malus-law polarizer chains and the three-polarizer
//!   minimal-transmission scan.
//! * [`epr_bell`]: two-photon coincidence models, local hidden-variable Monte
//!   Carlo and the CHSH statistic.
//!
//! All angles in the public API are in degrees; all quantities are in
//! natural units with `ħ = m = 1` unless a [`SystemConfig`] says otherwise.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod csv;
pub mod epr_bell;
mod error;
pub mod evolution;
mod linalg;
pub mod madelung;
pub mod polarization;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::{GridSpec, PotentialSpec, SystemConfig, WaveFunction};
