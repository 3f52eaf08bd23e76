//! Numerical toolkit for the small-data theory of the higher-order
//! anisotropic nonlinear Schrödinger equation
//!
//! ```text
//! i∂_t u + αΔu + iβ∂³_{x₁}u + γ∂⁴_{x₁}u + f(u) = 0
//! ```
//!
//! in modulation spaces `M^s_{2,q}`. Everything lives on a periodic box
//! `[-L, L)^d` with `L = π·M`, so the unit frequency cubes line up with the
//! discrete frequency lattice.

pub mod dispersion;
pub mod error;
pub mod harness;
pub mod io;
pub mod modspace;
pub mod nonlinear;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

pub use num_complex::Complex64;
pub use num_rational::Rational64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
