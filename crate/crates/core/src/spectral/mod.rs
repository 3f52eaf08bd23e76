//! Periodic-grid fields with exact discrete Fourier transforms.
//!
//! The continuum `ℝ^d` is replaced by `[-L, L)^d` with `L = π·M`, so that the
//! frequency lattice `(1/M)·ℤ^d` tiles every unit box `Q_k` evenly. All norms
//! are plain Riemann sums on the uniform grid; time integrals use the
//! trapezoid rule.

mod exponent;
pub(crate) mod fft;
mod field;
mod grid;
mod trajectory;

pub use exponent::{lq_aggregate, Exponent};
pub use field::SpectralField;
pub(crate) use field::lp_of_samples;
pub use grid::{make_grid, GridSpec, MIN_PERIODS};
pub use trajectory::{time_lp_norm, uniform_times, Quadrature, Trajectory};

/// `‖f‖_{L^p}` on the grid.
pub fn lp_norm(f: &SpectralField, p: Exponent) -> crate::Result<f64> {
    f.lp_norm(p)
}
