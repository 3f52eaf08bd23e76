//! Linear dispersion: the symbol `α|ξ|² + βξ₁³ + γξ₁⁴`, the propagator
//! `W(t) = F^{-1} e^{iφ(ξ)t} F`, and the exponent bookkeeping in [`params`].

pub mod params;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField};

pub use params::{
    admissible_defect, c_gamma, compute_m0, dual_pair, effective_l, in_two_to_inf, interval_i, interval_j, param_ledger,
    subadmissible_defect, DualPair, Interval, ParamLedger, RecipExponent,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquationCoeffs {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl EquationCoeffs {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if ![alpha, beta, gamma].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidCoefficients("coefficients must be finite".into()));
        }
        if alpha == 0.0 {
            return Err(Error::InvalidCoefficients("alpha must be nonzero".into()));
        }
        if beta == 0.0 && gamma == 0.0 {
            return Err(Error::InvalidCoefficients("(beta, gamma) must not both vanish".into()));
        }
        Ok(EquationCoeffs { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_nonzero(&self) -> bool {
        self.gamma != 0.0
    }

    pub fn c_gamma(&self) -> i64 {
        c_gamma(self.gamma_nonzero())
    }
}

impl<'de> Deserialize<'de> for EquationCoeffs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            alpha: f64,
            #[serde(default)]
            beta: f64,
            #[serde(default)]
            gamma: f64,
        }
        let raw = Raw::deserialize(d)?;
        EquationCoeffs::new(raw.alpha, raw.beta, raw.gamma).map_err(serde::de::Error::custom)
    }
}

/// `α|ξ|² + βξ₁³ + γξ₁⁴`.
pub fn symbol(coeffs: &EquationCoeffs, xi: &[f64]) -> f64 {
    let x1 = xi.first().copied().unwrap_or(0.0);
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let x1sq = x1 * x1;
    coeffs.alpha * xi2 + coeffs.beta * x1sq * x1 + coeffs.gamma * x1sq * x1sq
}

/// `W(t)` on a fixed grid with the phase table precomputed per frequency bin.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: GridSpec,
    coeffs: EquationCoeffs,
    phase: Vec<f64>,
}

impl Propagator {
    pub fn new(coeffs: EquationCoeffs, grid: GridSpec) -> Self {
        let mut phase = vec![0.0; grid.len()];
        let mut xi = vec![0.0; grid.dim()];
        grid.for_each_frequency(|i, lattice| {
            for (x, &j) in xi.iter_mut().zip(lattice) {
                *x = grid.frequency(j);
            }
            phase[i] = symbol(&coeffs, &xi);
        });
        Propagator { grid, coeffs, phase }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &EquationCoeffs {
        &self.coeffs
    }

    /// Symbol values in flat frequency-bin order.
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// Multiply an (unnormalized) spectrum by `e^{iφt}` in place.
    pub fn apply_to_spectrum(&self, t: f64, spectrum: &mut [C64]) {
        for (z, &ph) in spectrum.iter_mut().zip(&self.phase) {
            if *z != C64::new(0.0, 0.0) {
                *z *= C64::from_polar(1.0, ph * t);
            }
        }
    }

    /// `W(t)f`.
    pub fn apply(&self, t: f64, f: &SpectralField) -> Result<SpectralField> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let mut spec = f.spectrum().to_vec();
        self.apply_to_spectrum(t, &mut spec);
        SpectralField::from_spectrum(self.grid, spec)
    }
}

/// One-shot `W(t)f`.
pub fn propagate(coeffs: &EquationCoeffs, t: f64, f: &SpectralField) -> Result<SpectralField> {
    Propagator::new(*coeffs, *f.grid()).apply(t, f)
}
