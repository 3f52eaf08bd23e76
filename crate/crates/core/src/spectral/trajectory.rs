use serde::{Deserialize, Serialize};

use super::exponent::Exponent;
use super::field::SpectralField;
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Time quadrature used for the `L^r_t` part of space-time norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    #[default]
    Trapezoid,
}

/// Time samples `t_0 < … < t_N` of a field on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    quadrature: Quadrature,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if times.len() != fields.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrajectory("times must be strictly increasing".into()));
        }
        let grid = *fields[0].grid();
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Trajectory { times, fields, quadrature: Quadrature::Trapezoid })
    }

    /// Same field at every time.
    pub fn stationary(field: SpectralField, times: Vec<f64>) -> Result<Self> {
        let fields = vec![field; times.len()];
        Self::new(times, fields)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn grid(&self) -> &GridSpec {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn first(&self) -> &SpectralField {
        &self.fields[0]
    }

    pub fn last(&self) -> &SpectralField {
        &self.fields[self.fields.len() - 1]
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<SpectralField>) {
        (self.times, self.fields)
    }

    /// Apply `f(t, u(t))` sample-wise.
    pub fn map(&self, f: impl Fn(f64, &SpectralField) -> SpectralField) -> Result<Trajectory> {
        let fields = self.times.iter().zip(&self.fields).map(|(&t, u)| f(t, u)).collect();
        Trajectory::new(self.times.clone(), fields)
    }

    /// Sample-wise combination of two trajectories on the same time grid.
    pub fn zip_with(
        &self,
        other: &Trajectory,
        f: impl Fn(&SpectralField, &SpectralField) -> Result<SpectralField>,
    ) -> Result<Trajectory> {
        if self.times != other.times {
            return Err(Error::InvalidTrajectory("time grids differ".into()));
        }
        let fields = self.fields.iter().zip(&other.fields).map(|(a, b)| f(a, b)).collect::<Result<_>>()?;
        Trajectory::new(self.times.clone(), fields)
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    /// Every `stride`-th sample (the last sample is kept only if it lands on
    /// the stride).
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        let idx: Vec<usize> = (0..self.len()).step_by(stride.max(1)).collect();
        Trajectory::new(
            idx.iter().map(|&i| self.times[i]).collect(),
            idx.iter().map(|&i| self.fields[i].clone()).collect(),
        )
    }
}

/// `steps + 1` equispaced times covering `[t0, t1]`.
pub fn uniform_times(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    let dt = (t1 - t0) / steps as f64;
    (0..=steps).map(|j| if j == steps { t1 } else { t0 + j as f64 * dt }).collect()
}

/// Trapezoid-rule `L^r` norm over `[t_0, t_N]` of nonnegative samples;
/// `r = ∞` returns the maximum.
pub fn time_lp_norm(values: &[f64], times: &[f64], r: Exponent) -> Result<f64> {
    if values.is_empty() || times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if values.len() != times.len() {
        return Err(Error::InvalidTrajectory(format!(
            "{} values for {} times",
            values.len(),
            times.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("time_lp_norm"));
    }
    Ok(match r {
        Exponent::Infinity => values.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(r) => {
            let integral: f64 = times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].powf(r) + v[1].powf(r)))
                .sum();
            integral.powf(1.0 / r)
        }
    })
}
