use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[-L, L)^d` sampled with `n` points per axis.
///
/// `L` is always `π·M` for an integer `M ≥ 4`, so the frequency lattice has
/// spacing `1/M` and every unit box `Q_k` holds exactly `M^d` lattice points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridSpec {
    dim: usize,
    periods: u32,
    points: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    periods: Option<u32>,
    #[serde(default)]
    half_period: Option<f64>,
    points: usize,
}

impl TryFrom<GridRepr> for GridSpec {
    type Error = Error;

    fn try_from(raw: GridRepr) -> Result<Self> {
        match (raw.periods, raw.half_period) {
            (Some(m), _) => GridSpec::with_periods(raw.dim, m, raw.points),
            (None, Some(l)) => GridSpec::new(raw.dim, l, raw.points),
            (None, None) => Err(Error::InvalidGrid(
                "one of `periods` or `half_period` is required".into(),
            )),
        }
    }
}

impl From<GridSpec> for GridRepr {
    fn from(g: GridSpec) -> Self {
        GridRepr {
            dim: g.dim,
            periods: Some(g.periods),
            half_period: Some(g.half_period()),
            points: g.points,
        }
    }
}

pub const MIN_PERIODS: u32 = 4;

/// Validating constructor for a grid with half-period `half_period`.
pub fn make_grid(dim: usize, half_period: f64, points: usize) -> Result<GridSpec> {
    GridSpec::new(dim, half_period, points)
}

impl GridSpec {
    pub fn new(dim: usize, half_period: f64, points: usize) -> Result<Self> {
        if !half_period.is_finite() || half_period <= 0.0 {
            return Err(Error::InvalidGrid(format!("half-period {half_period} must be positive")));
        }
        let ratio = half_period / PI;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "half-period {half_period} is not an integer multiple of pi"
            )));
        }
        Self::with_periods(dim, m as u32, points)
    }

    pub fn with_periods(dim: usize, periods: u32, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if periods < MIN_PERIODS {
            return Err(Error::InvalidGrid(format!(
                "half-period must be pi*M with M >= {MIN_PERIODS}, got M = {periods}"
            )));
        }
        if !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("{points} points per axis is not a power of two")));
        }
        if dim == 3 && points > 64 {
            return Err(Error::InvalidGrid("three-dimensional grids are limited to 64 points per axis".into()));
        }
        Ok(GridSpec { dim, periods, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `M` in `L = π·M`.
    pub fn periods(&self) -> u32 {
        self.periods
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_period(&self) -> f64 {
        PI * self.periods as f64
    }

    /// Total number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial step `h = 2L/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_period() / self.points as f64
    }

    /// `h^d`, the Riemann-sum weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_period()).powi(self.dim as i32)
    }

    /// Frequency spacing `π/L = 1/M`.
    pub fn freq_spacing(&self) -> f64 {
        1.0 / self.periods as f64
    }

    /// Largest representable frequency magnitude, `n/(2M)`.
    pub fn nyquist(&self) -> f64 {
        self.points as f64 / (2.0 * self.periods as f64)
    }

    /// Signed lattice index of an FFT bin: `{0, …, n/2-1, -n/2, …, -1}`.
    pub fn lattice_index(&self, bin: usize) -> i64 {
        let n = self.points as i64;
        let b = bin as i64;
        if b < n / 2 { b } else { b - n }
    }

    /// FFT bin of a signed lattice index, if it is on the grid.
    pub fn bin_of(&self, index: i64) -> Option<usize> {
        let n = self.points as i64;
        if index < -n / 2 || index >= n / 2 {
            return None;
        }
        Some(index.rem_euclid(n) as usize)
    }

    pub fn frequency(&self, index: i64) -> f64 {
        index as f64 / self.periods as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_period() + i as f64 * self.spacing()
    }

    /// Row-major stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    /// Calls `f(flat, coords)` for every sample point in row-major order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut counter = vec![0usize; self.dim];
        let mut coords = vec![-self.half_period(); self.dim];
        for flat in 0..self.len() {
            f(flat, &coords);
            for axis in (0..self.dim).rev() {
                counter[axis] += 1;
                if counter[axis] < self.points {
                    coords[axis] = self.coordinate(counter[axis]);
                    break;
                }
                counter[axis] = 0;
                coords[axis] = -self.half_period();
            }
        }
    }

    /// Calls `f(flat, lattice)` for every frequency bin, with the signed
    /// lattice multi-index (frequency = lattice / M).
    pub fn for_each_frequency(&self, mut f: impl FnMut(usize, &[i64])) {
        let mut counter = vec![0usize; self.dim];
        let mut lattice = vec![0i64; self.dim];
        for flat in 0..self.len() {
            f(flat, &lattice);
            for axis in (0..self.dim).rev() {
                counter[axis] += 1;
                if counter[axis] < self.points {
                    lattice[axis] = self.lattice_index(counter[axis]);
                    break;
                }
                counter[axis] = 0;
                lattice[axis] = 0;
            }
        }
    }

    /// Flat FFT position of a signed lattice multi-index.
    pub fn flat_bin(&self, lattice: &[i64]) -> Option<usize> {
        let mut flat = 0;
        for &j in lattice {
            flat = flat * self.points + self.bin_of(j)?;
        }
        Some(flat)
    }

    /// Same box, `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<GridSpec> {
        GridSpec::with_periods(self.dim, self.periods, self.points * factor)
    }
}
