use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use super::exponent::Exponent;
use super::fft;
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Complex samples of a function on a periodic grid together with a lazily
/// computed (unnormalized) DFT. A field built from a spectrum keeps that
/// spectrum, and linear operations carry a known spectrum along, so exact
/// zeros in the frequency domain survive.
///
/// Fields are immutable; every arithmetic operation returns a new field.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<C64>,
    spectrum: OnceLock<Vec<C64>>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField { grid, values: vec![C64::new(0.0, 0.0); grid.len()], spectrum: OnceLock::new() }
    }

    pub fn from_values(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(SpectralField { grid, values, spectrum: OnceLock::new() })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        grid.for_each_point(|i, x| values[i] = f(x));
        SpectralField { grid, values, spectrum: OnceLock::new() }
    }

    /// Field from its unnormalized DFT.
    pub fn from_spectrum(grid: GridSpec, spectrum: Vec<C64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                spectrum.len()
            )));
        }
        let mut values = spectrum.clone();
        fft::inverse(&mut values, grid.points(), grid.dim());
        Ok(SpectralField { grid, values, spectrum: known(spectrum) })
    }

    /// `e^{i x·ξ}` sampled on the grid.
    pub fn plane_wave(grid: GridSpec, xi: &[f64]) -> Self {
        Self::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            C64::from_polar(1.0, phase)
        })
    }

    pub fn constant(grid: GridSpec, c: C64) -> Self {
        SpectralField { grid, values: vec![c; grid.len()], spectrum: OnceLock::new() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Unnormalized DFT, computed on first use and cached.
    pub fn spectrum(&self) -> &[C64] {
        self.spectrum.get_or_init(|| {
            let mut buf = self.values.clone();
            fft::forward(&mut buf, self.grid.points(), self.grid.dim());
            buf
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn scale(&self, c: C64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            values: self.values.iter().map(|&z| c * z).collect(),
            spectrum: self.spectrum.get().map_or_else(OnceLock::new, |s| known(s.iter().map(|&z| c * z).collect())),
        }
    }

    pub fn conj(&self) -> SpectralField {
        self.map(|z| z.conj())
    }

    /// `a·x + y`.
    pub fn axpy(a: C64, x: &SpectralField, y: &SpectralField) -> Result<SpectralField> {
        x.check_grid(y)?;
        let spectrum = match (x.spectrum.get(), y.spectrum.get()) {
            (Some(sx), Some(sy)) => known(sx.iter().zip(sy).map(|(&u, &v)| a * u + v).collect()),
            _ => OnceLock::new(),
        };
        Ok(SpectralField { grid: x.grid, values: x.values.iter().zip(&y.values).map(|(&u, &v)| a * u + v).collect(), spectrum })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        Self::axpy(C64::new(1.0, 0.0), other, self)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        Self::axpy(C64::new(-1.0, 0.0), other, self)
    }

    pub fn pointwise_mul(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_grid(other)?;
        Ok(SpectralField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&u, &v)| u * v).collect(),
            spectrum: OnceLock::new(),
        })
    }

    /// Fourier multiplier: `F^{-1} m F` with `m` given per lattice multi-index.
    pub fn apply_multiplier(&self, m: impl Fn(&[i64]) -> C64) -> SpectralField {
        let mut spec = self.spectrum().to_vec();
        self.grid.for_each_frequency(|i, lattice| spec[i] *= m(lattice));
        let mut values = spec.clone();
        fft::inverse(&mut values, self.grid.points(), self.grid.dim());
        SpectralField { grid: self.grid, values, spectrum: known(spec) }
    }

    /// Riemann-sum `L^p` norm `(Σ |f(x_j)|^p h^d)^{1/p}`; `p = ∞` is the max.
    pub fn lp_norm(&self, p: Exponent) -> Result<f64> {
        if !self.is_finite() {
            return Err(Error::NonFinite("lp_norm"));
        }
        Ok(lp_of_samples(&self.values, p, self.grid.cell_volume()))
    }

    /// `L^2` norm evaluated on the frequency side (discrete Parseval).
    pub fn l2_norm_spectral(&self) -> f64 {
        let energy: f64 = self.spectrum().iter().map(|z| z.norm_sqr()).sum();
        (energy * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// Squared `L^2` norm.
    pub fn mass(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        s * self.grid.cell_volume()
    }

    /// Band-limited interpolation onto a grid with `factor` times as many
    /// points per axis (zero padding of the spectrum).
    pub fn upsample(&self, factor: usize) -> Result<SpectralField> {
        let fine = self.grid.refined(factor)?;
        let mut spec = vec![C64::new(0.0, 0.0); fine.len()];
        let src = self.spectrum();
        let n = self.grid.points() as i64;
        let scale = fine.len() as f64 / self.grid.len() as f64;
        self.grid.for_each_frequency(|i, lattice| {
            // the Nyquist bin is ambiguous; drop it
            if lattice.iter().any(|&j| j == -n / 2) {
                return;
            }
            if let Some(k) = fine.flat_bin(lattice) {
                spec[k] = src[i] * scale;
            }
        });
        SpectralField::from_spectrum(fine, spec)
    }
}

fn known(spectrum: Vec<C64>) -> OnceLock<Vec<C64>> {
    let cell = OnceLock::new();
    let _ = cell.set(spectrum);
    cell
}

pub(crate) fn lp_of_samples(values: &[C64], p: Exponent, weight: f64) -> f64 {
    match p {
        Exponent::Infinity => values.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Exponent::Finite(p) if p == 2.0 => {
            (values.iter().map(|z| z.norm_sqr()).sum::<f64>() * weight).sqrt()
        }
        Exponent::Finite(p) if p == 1.0 => values.iter().map(|z| z.norm()).sum::<f64>() * weight,
        Exponent::Finite(p) if p.fract() == 0.0 && p % 2.0 == 0.0 && p <= 64.0 => {
            let half = (p / 2.0) as i32;
            (values.iter().map(|z| z.norm_sqr().powi(half)).sum::<f64>() * weight).powf(1.0 / p)
        }
        Exponent::Finite(p) => {
            let half = p / 2.0;
            (values.iter().map(|z| z.norm_sqr().powf(half)).sum::<f64>() * weight).powf(1.0 / p)
        }
    }
}
