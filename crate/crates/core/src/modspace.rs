//! Frequency-uniform decomposition and the norms built on it.
//!
//! A [`Partition`] realizes a smooth partition of unity `(σ_k)` adapted to the
//! unit cubes `Q_k = k + (-1/2, 1/2]^d` as a tensor product of a 1-D profile
//! sampled on the frequency lattice. The box operator is `□_k = F^{-1} σ_k F`,
//! and the modulation and Planchon-type norms aggregate per-box `L^p` norms
//! with the weight `⟨k⟩^s` in `l^q`.
//!
//! Per-box `L^p` norms are evaluated three ways, all equal to the fine-grid
//! Riemann sum up to rounding:
//! * `p = 2` by Parseval on the frequency side;
//! * even integer `p` on a reduced grid: `□_k f` is `e^{ik·x}` times a
//!   trigonometric polynomial `g` of degree `J` per axis, so `|g|^p` has degree
//!   `pJ` and its Riemann sum is exact on any grid with more than `pJ` points
//!   per axis;
//! * everything else on the full grid.
//!
//! Outside `p = 2` the samples are summed straight from the window
//! coefficients rather than by a transform of the whole spectrum.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{lp_of_samples, lq_aggregate, time_lp_norm, Exponent, GridSpec, SpectralField, Trajectory};

/// Support half-width of the 1-D profile (in frequency units).
pub const PROFILE_RADIUS: f64 = 0.75;

pub const PARTITION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    /// `(1 - (x/a)^2)^3` on `|x| < a`, normalized by the sum over integer
    /// translates.
    PiecewiseSmoothBump,
    /// `1` on `|x| ≤ 1/4`, `cos²(π(|x| - 1/4))` on `1/4 < |x| < 3/4`.
    TrigonometricWindow,
}

impl PartitionKind {
    pub const ALL: [PartitionKind; 2] = [PartitionKind::PiecewiseSmoothBump, PartitionKind::TrigonometricWindow];

    fn raw(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            PartitionKind::PiecewiseSmoothBump => {
                if ax >= PROFILE_RADIUS {
                    0.0
                } else {
                    let t = ax / PROFILE_RADIUS;
                    (1.0 - t * t).powi(3)
                }
            }
            PartitionKind::TrigonometricWindow => {
                if ax <= 0.25 {
                    1.0
                } else if ax >= PROFILE_RADIUS {
                    0.0
                } else {
                    (PI * (ax - 0.25)).cos().powi(2)
                }
            }
        }
    }

    /// The 1-D profile `φ`, with `Σ_l φ(x - l) = 1`.
    pub fn profile(self, x: f64) -> f64 {
        match self {
            PartitionKind::TrigonometricWindow => self.raw(x),
            PartitionKind::PiecewiseSmoothBump => {
                let num = self.raw(x);
                if num == 0.0 {
                    return 0.0;
                }
                let base = x.round();
                let den: f64 = (-1..=1).map(|l| self.raw(x - (base + l as f64))).sum();
                num / den
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub k_max: i64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max: 5 }
    }
}

/// `M^s_{p,q}` index triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModNormSpec {
    pub p: Exponent,
    pub q: Exponent,
    pub s: f64,
}

impl ModNormSpec {
    pub fn new(p: Exponent, q: Exponent, s: f64) -> Self {
        ModNormSpec { p, q, s }
    }

    /// Weight condition of the product estimates: `s ≥ 0` for `q = 1`,
    /// `s > d/q'` otherwise.
    pub fn weight_admissible(&self, dim: usize) -> bool {
        weight_admissible(self.q, self.s, dim)
    }
}

pub fn weight_admissible(q: Exponent, s: f64, dim: usize) -> bool {
    match q {
        Exponent::Finite(q) if q == 1.0 => s >= 0.0,
        _ => s > dim as f64 * (1.0 - q.recip()),
    }
}

/// `l^{s,q}_□(L^r L^p)` index tuple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanchonNormSpec {
    pub s: f64,
    pub q: Exponent,
    pub r: Exponent,
    pub p: Exponent,
}

impl PlanchonNormSpec {
    pub fn new(s: f64, q: Exponent, r: Exponent, p: Exponent) -> Self {
        PlanchonNormSpec { s, q, r, p }
    }

    pub fn spatial(&self) -> ModNormSpec {
        ModNormSpec { p: self.p, q: self.q, s: self.s }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub spec: ModNormSpec,
    pub value: f64,
    pub truncation_residual: f64,
}

/// A realized partition of unity on a grid.
#[derive(Clone, Debug)]
pub struct Partition {
    grid: GridSpec,
    spec: PartitionSpec,
    half_width: i64,
    profile: Vec<f64>,
    boxes: Vec<Vec<i64>>,
    /// Per box: `(bin, slot in the (2w+1)^d window, σ_k)` with `σ_k ≠ 0`.
    windows: Vec<Vec<(usize, usize, f64)>>,
    retained_sum: Vec<f64>,
    lower_bound: f64,
    unity_residual: f64,
    support_radius: f64,
}

impl Partition {
    pub fn build(spec: PartitionSpec, grid: GridSpec) -> Result<Partition> {
        let m = grid.periods() as i64;
        let k_max = spec.k_max;
        if k_max < 2 {
            return Err(Error::PartitionOverflow(format!("K_max = {k_max} must be at least 2")));
        }
        if (grid.points() as i64) < 2 * m * (2 * k_max + 2) {
            return Err(Error::PartitionOverflow(format!(
                "{} points per axis cannot hold 2*K_max+2 = {} boxes below Nyquist {}",
                grid.points(),
                2 * k_max + 2,
                grid.nyquist()
            )));
        }

        // largest offset with x = o/M strictly inside the profile support
        let half_width = ((PROFILE_RADIUS * m as f64).ceil() as i64) - 1;
        let profile: Vec<f64> = (-half_width..=half_width).map(|o| spec.kind.profile(o as f64 / m as f64)).collect();

        let support_radius = (grid.dim() as f64).sqrt() * half_width as f64 / m as f64;
        if support_radius >= (grid.dim() as f64).sqrt() {
            return Err(Error::PartitionOverflow("profile support exceeds B_sqrt(d)(k)".into()));
        }

        // achieved lower bound on Q_0 lattice points, offsets in (-M/2, M/2]
        let min_1d = (-(m / 2) + if m % 2 == 0 { 1 } else { 0 }..=m / 2)
            .map(|o| profile[(o + half_width) as usize])
            .fold(f64::INFINITY, f64::min);
        let lower_bound = min_1d.powi(grid.dim() as i32);

        // per-axis sum over retained boxes at every lattice index
        let n = grid.points();
        let axis_sum: Vec<f64> = (0..n)
            .map(|bin| {
                let j = grid.lattice_index(bin);
                (-k_max..=k_max)
                    .filter_map(|k| {
                        let o = j - k * m;
                        (o.abs() <= half_width).then(|| profile[(o + half_width) as usize])
                    })
                    .sum()
            })
            .collect();

        let mut retained_sum = vec![0.0; grid.len()];
        let mut unity_residual: f64 = 0.0;
        let interior = (k_max - 1) * m;
        let mut bins = vec![0usize; grid.dim()];
        grid.for_each_frequency(|flat, lattice| {
            for (b, &j) in bins.iter_mut().zip(lattice) {
                *b = j.rem_euclid(n as i64) as usize;
            }
            let total: f64 = bins.iter().map(|&b| axis_sum[b]).product();
            retained_sum[flat] = total;
            if lattice.iter().all(|j| j.abs() <= interior) {
                unity_residual = unity_residual.max((total - 1.0).abs());
            }
        });
        if unity_residual > PARTITION_TOLERANCE {
            return Err(Error::PartitionResidual { residual: unity_residual, tolerance: PARTITION_TOLERANCE });
        }

        let boxes = box_indices(grid.dim(), k_max);
        let mut partition = Partition {
            grid,
            spec,
            half_width,
            profile,
            boxes,
            windows: Vec::new(),
            retained_sum,
            lower_bound,
            unity_residual,
            support_radius,
        };
        let width = (2 * half_width + 1) as usize;
        partition.windows = partition
            .boxes
            .iter()
            .map(|k| {
                let mut entries = Vec::new();
                partition.for_each_in_window(k, |bin, offset, sigma| {
                    let slot = offset.iter().fold(0, |acc, &o| acc * width + (o + half_width) as usize);
                    entries.push((bin, slot, sigma));
                });
                entries
            })
            .collect();
        Ok(partition)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spec(&self) -> PartitionSpec {
        self.spec
    }

    pub fn k_max(&self) -> i64 {
        self.spec.k_max
    }

    /// All retained box indices `|k|_∞ ≤ K_max`, lexicographic.
    pub fn boxes(&self) -> &[Vec<i64>] {
        &self.boxes
    }

    /// Largest lattice offset from the box center carrying weight.
    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    /// Achieved `C` in `σ_k(ξ) ≥ C` on `Q_k`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Max `|Σ_k σ_k(ξ) - 1|` over lattice points with `|ξ|_∞ ≤ K_max - 1`.
    pub fn unity_residual(&self) -> f64 {
        self.unity_residual
    }

    /// Euclidean radius of the support of `σ_0`.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    fn check_box(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.grid.dim() || k.iter().any(|c| c.abs() > self.spec.k_max) {
            return Err(Error::BoxOutOfRange(k.to_vec()));
        }
        Ok(())
    }

    /// `σ_k` at a lattice multi-index (frequency `lattice / M`).
    pub fn sigma(&self, k: &[i64], lattice: &[i64]) -> f64 {
        let m = self.grid.periods() as i64;
        k.iter()
            .zip(lattice)
            .map(|(&kc, &j)| {
                let o = j - kc * m;
                if o.abs() > self.half_width { 0.0 } else { self.profile[(o + self.half_width) as usize] }
            })
            .product()
    }

    /// `⟨k⟩^s = (1 + |k|^2)^{s/2}`.
    pub fn weight(k: &[i64], s: f64) -> f64 {
        let k2: i64 = k.iter().map(|c| c * c).sum();
        (1.0 + k2 as f64).powf(0.5 * s)
    }

    /// Visit `(fine_bin, window_offset, σ_k)` for every lattice point in the
    /// support of `σ_k`.
    fn for_each_in_window(&self, k: &[i64], mut f: impl FnMut(usize, &[i64], f64)) {
        let d = self.grid.dim();
        let m = self.grid.periods() as i64;
        let w = self.half_width;
        let mut offset = vec![-w; d];
        let mut lattice = vec![0i64; d];
        loop {
            let mut sigma = 1.0;
            for a in 0..d {
                lattice[a] = k[a] * m + offset[a];
                sigma *= self.profile[(offset[a] + w) as usize];
            }
            if sigma != 0.0 {
                let bin = self.grid.flat_bin(&lattice).expect("window inside grid");
                f(bin, &offset, sigma);
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                offset[axis] += 1;
                if offset[axis] <= w {
                    break;
                }
                offset[axis] = -w;
            }
        }
    }

    /// `□_k f`.
    pub fn box_op(&self, k: &[i64], f: &SpectralField) -> Result<SpectralField> {
        self.check_box(k)?;
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let spec = f.spectrum();
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        self.for_each_in_window(k, |bin, _, sigma| out[bin] = spec[bin] * sigma);
        SpectralField::from_spectrum(self.grid, out)
    }

    /// `Σ_{|k|≤K_max} □_k f`.
    pub fn reconstruct(&self, f: &SpectralField) -> Result<SpectralField> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let spec: Vec<C64> = f.spectrum().iter().zip(&self.retained_sum).map(|(z, s)| z * s).collect();
        SpectralField::from_spectrum(self.grid, spec)
    }

    /// `‖f - Σ_{|k|≤K_max} □_k f‖_{L^2}`.
    pub fn truncation_residual(&self, f: &SpectralField) -> f64 {
        let energy: f64 =
            f.spectrum().iter().zip(&self.retained_sum).map(|(z, s)| z.norm_sqr() * (1.0 - s).powi(2)).sum();
        (energy * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    /// Reduced grid size for the exact even-`p` path, if it beats the full grid.
    fn reduced_points(&self, p: Exponent) -> Option<usize> {
        let p = p.even_integer()? as i64;
        let needed = (p * self.half_width + 1).max(2 * self.half_width + 1) as usize;
        let n = (needed..).find(|&n| is_smooth(n)).expect("5-smooth numbers are unbounded");
        (n < self.grid.points()).then_some(n)
    }

    /// `‖□_k f‖_{L^p}` for every retained box, from the field's spectrum.
    pub fn box_norms_from_spectrum(&self, spectrum: &[C64], p: Exponent) -> Vec<f64> {
        let grid = self.grid;
        let total = grid.len() as f64;
        if p == Exponent::Finite(2.0) {
            let scale = grid.cell_volume() / (total * total);
            return self
                .windows
                .par_iter()
                .map(|window| {
                    let acc: f64 = window.iter().map(|&(bin, _, sigma)| sigma * sigma * spectrum[bin].norm_sqr()).sum();
                    (acc * scale * total).sqrt()
                })
                .collect();
        }
        // the centre modulation e^{ik·x} has modulus one, so only the window
        // offsets enter the samples
        let d = grid.dim();
        let nr = self.reduced_points(p).unwrap_or(grid.points());
        let weight = (2.0 * grid.half_period() / nr as f64).powi(d as i32);
        let w = self.half_width;
        let width = (2 * w + 1) as usize;
        let twiddle: Vec<C64> = (-w..=w)
            .flat_map(|o| (0..nr).map(move |j| C64::from_polar(1.0, 2.0 * PI * ((o * j as i64) as f64) / nr as f64)))
            .collect();
        self.windows
            .par_iter()
            .map(|window| {
                if window.iter().all(|&(bin, _, _)| spectrum[bin] == C64::new(0.0, 0.0)) {
                    return 0.0;
                }
                let mut coeffs = vec![C64::new(0.0, 0.0); width.pow(d as u32)];
                for &(bin, slot, sigma) in window {
                    coeffs[slot] = spectrum[bin] * (sigma / total);
                }
                lp_of_samples(&synthesize(coeffs, width, nr, d, &twiddle), p, weight)
            })
            .collect()
    }

    pub fn box_norms(&self, f: &SpectralField, p: Exponent) -> Result<Vec<f64>> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        if !f.is_finite() {
            return Err(Error::NonFinite("box_norms"));
        }
        Ok(self.box_norms_from_spectrum(f.spectrum(), p))
    }

    /// Weighted `l^q` aggregation of per-box values in [`Partition::boxes`] order.
    pub fn aggregate(&self, per_box: &[f64], s: f64, q: Exponent) -> f64 {
        lq_aggregate(self.boxes.iter().zip(per_box).map(|(k, v)| Self::weight(k, s) * v), q)
    }

    /// `‖f‖_{M^s_{p,q}}` over the retained boxes.
    pub fn mod_norm(&self, f: &SpectralField, spec: &ModNormSpec) -> Result<f64> {
        let norms = self.box_norms(f, spec.p)?;
        Ok(self.aggregate(&norms, spec.s, spec.q))
    }

    pub fn mod_norm_report(&self, f: &SpectralField, spec: &ModNormSpec) -> Result<NormReport> {
        Ok(NormReport { spec: *spec, value: self.mod_norm(f, spec)?, truncation_residual: self.truncation_residual(f) })
    }

    /// Per-sample, per-box spatial norms of a trajectory.
    pub fn box_norm_rows(&self, u: &Trajectory, p: Exponent) -> Result<Vec<Vec<f64>>> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        u.fields().iter().map(|f| self.box_norms(f, p)).collect()
    }

    /// Combine per-sample box norms (`rows[j][b]`) into `l^{s,q}_□(L^r_t …)`.
    pub fn planchon_from_rows(&self, rows: &[Vec<f64>], times: &[f64], s: f64, q: Exponent, r: Exponent) -> Result<f64> {
        let per_box = (0..self.boxes.len())
            .map(|b| {
                let column: Vec<f64> = rows.iter().map(|row| row[b]).collect();
                time_lp_norm(&column, times, r)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.aggregate(&per_box, s, q))
    }

    /// `‖u‖_{l^{s,q}_□(L^r_t L^p_x)}`.
    pub fn planchon_norm(&self, u: &Trajectory, spec: &PlanchonNormSpec) -> Result<f64> {
        let rows = self.box_norm_rows(u, spec.p)?;
        self.planchon_from_rows(&rows, u.times(), spec.s, spec.q, spec.r)
    }

    /// `‖u‖_X = ‖u‖_{l^{s,q}_□(L^∞ L^2)} + ‖u‖_{l^{s,q}_□(L^r L^p)}`.
    pub fn x_norm(&self, u: &Trajectory, s: f64, q: Exponent, r: Exponent, p: Exponent) -> Result<f64> {
        let energy = self.planchon_norm(u, &PlanchonNormSpec::new(s, q, Exponent::Infinity, Exponent::Finite(2.0)))?;
        let strichartz = self.planchon_norm(u, &PlanchonNormSpec::new(s, q, r, p))?;
        Ok(energy + strichartz)
    }
}

/// Samples on `nr^d` points of the trigonometric polynomial with
/// coefficients on `width^d` centered offsets, one axis at a time.
fn synthesize(mut data: Vec<C64>, width: usize, nr: usize, d: usize, twiddle: &[C64]) -> Vec<C64> {
    let mut shape = vec![width; d];
    for axis in (0..d).rev() {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = vec![C64::new(0.0, 0.0); outer * nr * inner];
        for a in 0..outer {
            let src = &data[a * width * inner..(a + 1) * width * inner];
            let dst = &mut out[a * nr * inner..(a + 1) * nr * inner];
            for o in 0..width {
                let row = &src[o * inner..(o + 1) * inner];
                if row.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let tw = &twiddle[o * nr..(o + 1) * nr];
                if inner == 1 {
                    let x = row[0];
                    for (y, t) in dst.iter_mut().zip(tw) {
                        *y += t * x;
                    }
                } else {
                    for (chunk, t) in dst.chunks_exact_mut(inner).zip(tw) {
                        for (y, x) in chunk.iter_mut().zip(row) {
                            *y += t * x;
                        }
                    }
                }
            }
        }
        shape[axis] = nr;
        data = out;
    }
    data
}

fn is_smooth(mut n: usize) -> bool {
    for f in [2, 3, 5] {
        while n % f == 0 {
            n /= f;
        }
    }
    n == 1
}

fn box_indices(dim: usize, k_max: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut k = vec![-k_max; dim];
    loop {
        out.push(k.clone());
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] <= k_max {
                break;
            }
            k[axis] = -k_max;
        }
    }
}

/// One-shot `□_k f` with a freshly built partition.
pub fn box_op(spec: PartitionSpec, k: &[i64], f: &SpectralField) -> Result<SpectralField> {
    Partition::build(spec, *f.grid())?.box_op(k, f)
}

/// One-shot modulation norm.
pub fn mod_norm(partition: &Partition, f: &SpectralField, spec: &ModNormSpec) -> Result<f64> {
    partition.mod_norm(f, spec)
}

/// One-shot Planchon-type norm.
pub fn planchon_norm(partition: &Partition, u: &Trajectory, spec: &PlanchonNormSpec) -> Result<f64> {
    partition.planchon_norm(u, spec)
}
