//! Link-level simulation and joint optimization for RIS-assisted wideband
//! mmWave MIMO-OFDM downlinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: clustered geometric Rician taps and their per-subcarrier responses.
//! - [`propagation`]: link distances, LOS probability, direct/indirect pathloss gains.
//! - [`rate`]: equivalent channel and the averaged log-det spectral efficiency.
//! - [`power`]: spatial-frequency waterfilling of the transmit covariances.
//! - [`pga`]: closed-form phase gradient, unit-modulus projection and the joint ascent loop.
//! - [`flops`]: analytical FLOP accounting for the optimizer kernels.
//! - [`harness`]: configuration, seeded Monte Carlo scenarios and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod flops;
pub mod harness;
pub mod linalg;
pub mod pga;
pub mod power;
pub mod propagation;
pub mod rate;
pub mod rng;

mod error;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
