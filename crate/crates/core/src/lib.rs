//! Particle approximation of second-order HJB equations on Wasserstein space
//! over the flat torus `T^d = R^d / 2πZ^d`.
//!
//! * [`torus`], [`transport`], [`sobolev`]: measures, Fourier coefficients,
//!   `W_1` and the Fourier–Wasserstein metric `ρ_*` with its derivatives.
//! * [`hjb`]: problem families, finite-difference and Monte Carlo particle
//!   solvers, the Fokker–Planck mean-field reference and the extension `ĥ^N`.
//! * [`convolution`]: inf/sup-convolutions in the `ρ_*` geometry.
//! * [`rate`]: convergence-rate experiments and sample-complexity probes.

pub mod convolution;
pub mod error;
pub mod hjb;
pub mod rate;
pub mod rng;
pub mod sobolev;
pub mod torus;
pub mod transport;

pub use error::{Error, Result};
