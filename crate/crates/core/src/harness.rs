//! Monte-Carlo checks of the linear and multilinear estimates.
//!
//! An estimate `A ≲ B` is tested empirically: over an ensemble of random
//! band-limited fields the ratio `A/B` must stay bounded, meaning the largest
//! ratio is within [`RATIO_BOUND`] times the median, and the largest ratio
//! must not move by more than [`REFINEMENT_TOLERANCE`] when the grid is
//! refined. Sample `i` of an ensemble draws from its own ChaCha stream, so
//! reports are reproducible and independent of the thread count.

use num_complex::Complex64 as C64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{self, EquationCoeffs, Propagator, RecipExponent};
use crate::error::{Error, Result};
use crate::modspace::{weight_admissible, ModNormSpec, Partition, PartitionKind, PartitionSpec};
use crate::nonlinear::{power_lipschitz_witness, LipschitzExponents, Pattern};
use crate::solver::TimeWindow;
use crate::spectral::{fft, lp_of_samples, time_lp_norm, Exponent, GridSpec, SpectralField, Trajectory};

/// Largest admissible max/median ratio spread.
pub const RATIO_BOUND: f64 = 10.0;

/// Largest admissible relative change of the max ratio under grid doubling.
pub const REFINEMENT_TOLERANCE: f64 = 0.2;

/// Share of the window used for the tail diagnostic.
const TAIL_SHARE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum FieldLaw {
    /// Independent complex normal coefficients scaled by `⟨ξ⟩^{-decay}`.
    GaussianSpectrum { decay: f64 },
    /// Random coefficients inside one randomly chosen unit box.
    SingleBox,
    /// Random coefficients inside `boxes` distinct random unit boxes.
    MultiBox { boxes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    pub law: FieldLaw,
    /// `L²` norm of every drawn field.
    pub amplitude: f64,
    /// Largest `|ξ|_∞` in the spectrum of a drawn field.
    pub band: f64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidEnsemble("count must be at least 1".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidEnsemble(format!("amplitude {} must be finite and nonnegative", self.amplitude)));
        }
        match self.law {
            FieldLaw::GaussianSpectrum { decay } if !(decay > 0.0 && decay.is_finite()) => {
                Err(Error::InvalidEnsemble(format!("decay exponent {decay} must be positive")))
            }
            FieldLaw::GaussianSpectrum { .. } if !(self.band > 0.0) => {
                Err(Error::InvalidEnsemble(format!("band {} must be positive", self.band)))
            }
            FieldLaw::SingleBox | FieldLaw::MultiBox { .. } if !(self.band >= 0.5) => {
                Err(Error::InvalidEnsemble(format!("band {} does not contain a unit box", self.band)))
            }
            FieldLaw::MultiBox { boxes: 0 } => Err(Error::InvalidEnsemble("multi-box law needs boxes >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Generator for slot `slot` of sample `sample`.
    pub fn rng(&self, sample: usize, slot: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((sample as u64) << 8) | (slot as u64 & 0xff));
        rng
    }

    /// Field number `slot` of sample `sample`. The draw depends only on the
    /// period count of the grid, so refining the grid samples the same
    /// trigonometric polynomial.
    pub fn draw(&self, sample: usize, slot: usize, grid: GridSpec) -> Result<SpectralField> {
        self.validate()?;
        let mut rng = self.rng(sample, slot);
        let m = grid.periods() as i64;
        let d = grid.dim();
        let mut coeffs: Vec<(Vec<i64>, C64)> = Vec::new();
        match self.law {
            FieldLaw::GaussianSpectrum { decay } => {
                let jmax = (self.band * m as f64 + 1e-9).floor() as i64;
                for j in lattice_product(&vec![(-jmax, jmax); d]) {
                    let xi2: f64 = j.iter().map(|&a| (a as f64 / m as f64).powi(2)).sum();
                    let c = normal(&mut rng) * (1.0 + xi2).powf(-0.5 * decay);
                    coeffs.push((j, c));
                }
            }
            FieldLaw::SingleBox | FieldLaw::MultiBox { .. } => {
                let reach = (self.band - 0.5 + 1e-9).floor() as i64;
                let centres = lattice_product(&vec![(-reach, reach); d]);
                let wanted = match self.law {
                    FieldLaw::MultiBox { boxes } => boxes,
                    _ => 1,
                };
                if wanted > centres.len() {
                    return Err(Error::InvalidEnsemble(format!(
                        "{wanted} boxes requested but the band holds {}",
                        centres.len()
                    )));
                }
                let mut chosen = index::sample(&mut rng, centres.len(), wanted).into_vec();
                chosen.sort_unstable();
                // lattice points of Q_k: k - 1/2 < j/M <= k + 1/2
                let lo = |k: i64| (2 * k * m - m).div_euclid(2) + 1;
                let hi = |k: i64| (2 * k * m + m).div_euclid(2);
                for c in chosen {
                    let ranges: Vec<(i64, i64)> = centres[c].iter().map(|&k| (lo(k), hi(k))).collect();
                    for j in lattice_product(&ranges) {
                        coeffs.push((j, normal(&mut rng)));
                    }
                }
            }
        }
        let total = grid.len() as f64;
        let mut spectrum = vec![C64::new(0.0, 0.0); grid.len()];
        for (j, c) in coeffs {
            let bin = grid
                .flat_bin(&j)
                .filter(|_| j.iter().all(|&a| 2 * a.abs() < grid.points() as i64))
                .ok_or_else(|| Error::InvalidEnsemble(format!("band {} exceeds the grid", self.band)))?;
            spectrum[bin] += c * total;
        }
        let f = SpectralField::from_spectrum(grid, spectrum)?;
        let norm = f.l2_norm_spectral();
        if norm == 0.0 || self.amplitude == 0.0 {
            return Ok(SpectralField::zeros(grid));
        }
        Ok(f.scale(C64::new(self.amplitude / norm, 0.0)))
    }
}

/// All multi-indices in `∏ [lo_a, hi_a]`, lexicographic.
fn lattice_product(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &(lo, hi) in ranges {
        out = out.into_iter().flat_map(|p| (lo..=hi).map(move |a| [p.clone(), vec![a]].concat())).collect();
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub lhs: f64,
    pub rhs: f64,
    /// `None` for `0/0` and for `rhs = 0 < lhs`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub samples: Vec<RatioSample>,
    pub max: f64,
    pub median: f64,
    /// Samples with `rhs = 0` and `lhs > 0`.
    pub failures: usize,
    /// `0/0` samples, left out of the statistics.
    pub excluded: usize,
    /// Samples with `lhs > RATIO_BOUND · median · rhs`.
    pub flagged: Vec<usize>,
    /// Hypotheses deliberately violated; the report carries trend data only.
    pub probe: bool,
}

impl RatioReport {
    pub fn from_pairs(pairs: &[(f64, f64)], probe: bool) -> Result<Self> {
        if pairs.iter().any(|(l, r)| !(l.is_finite() && r.is_finite() && *l >= 0.0 && *r >= 0.0)) {
            return Err(Error::NonFinite("ratio sample"));
        }
        let samples: Vec<RatioSample> = pairs
            .iter()
            .map(|&(lhs, rhs)| RatioSample { lhs, rhs, ratio: (rhs > 0.0).then(|| lhs / rhs) })
            .collect();
        let failures = samples.iter().filter(|s| s.rhs == 0.0 && s.lhs > 0.0).count();
        let excluded = samples.iter().filter(|s| s.rhs == 0.0 && s.lhs == 0.0).count();
        let mut ratios: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let median = match ratios.len() {
            0 => 0.0,
            n if n % 2 == 1 => ratios[n / 2],
            n => 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]),
        };
        let max = ratios.last().copied().unwrap_or(0.0);
        let flagged = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.ratio.is_some_and(|r| r > RATIO_BOUND * median))
            .map(|(i, _)| i)
            .collect();
        Ok(RatioReport { samples, max, median, failures, excluded, flagged, probe })
    }

    /// `max / median`, or 0 without usable samples.
    pub fn spread(&self) -> f64 {
        if self.median > 0.0 {
            self.max / self.median
        } else {
            0.0
        }
    }

    /// No failures and no flagged samples. Probe reports always pass.
    pub fn bounded(&self) -> bool {
        self.probe || (self.failures == 0 && self.flagged.is_empty())
    }
}

/// `|max_fine - max_coarse| / max_coarse`.
pub fn refinement_change(coarse: &RatioReport, fine: &RatioReport) -> f64 {
    (fine.max - coarse.max).abs() / coarse.max
}

/// Everything a check needs besides the ensemble and the exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSetup {
    pub coeffs: EquationCoeffs,
    pub grid: GridSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub window: TimeWindow,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "one")]
    pub q: Exponent,
}

fn one() -> Exponent {
    Exponent::Finite(1.0)
}

impl CheckSetup {
    /// Same box and window on a grid with twice the points per axis.
    pub fn refined(&self) -> Result<CheckSetup> {
        Ok(CheckSetup { grid: self.grid.refined(2)?, ..*self })
    }

    fn times(&self) -> Vec<f64> {
        self.window.times()
    }

    fn partition(&self) -> Result<Partition> {
        Partition::build(self.partition, self.grid)
    }

    fn admissible(&self, inv_p: RecipExponent, inv_r: RecipExponent) -> bool {
        let d = self.grid.dim() as i64;
        let c = self.coeffs.c_gamma();
        dispersion::in_two_to_inf(inv_p.recip())
            && dispersion::in_two_to_inf(inv_r.recip())
            && dispersion::admissible_defect(d, c, inv_p.recip(), inv_r.recip()) == 0.into()
    }

    fn require_admissible(&self, inv_p: RecipExponent, inv_r: RecipExponent, probe: bool) -> Result<()> {
        if !probe && !self.admissible(inv_p, inv_r) {
            return Err(Error::Hypothesis(format!("(p, r) = ({inv_p}, {inv_r}) in reciprocals is not admissible")));
        }
        Ok(())
    }

    fn require_weight(&self, probe: bool) -> Result<()> {
        if !probe && !weight_admissible(self.q, self.s, self.grid.dim()) {
            return Err(Error::Hypothesis(format!("weight s = {} is not admissible for q = {}", self.s, self.q)));
        }
        Ok(())
    }
}

fn exponent(r: RecipExponent) -> Result<Exponent> {
    r.to_exponent()
}

/// `e^{iφt}·spectrum`.
fn evolve_spectrum(prop: &Propagator, t: f64, spectrum: &[C64]) -> Vec<C64> {
    let mut out = spectrum.to_vec();
    prop.apply_to_spectrum(t, &mut out);
    out
}

fn values_of(grid: &GridSpec, spectrum: &[C64]) -> Vec<C64> {
    let mut buf = spectrum.to_vec();
    fft::inverse(&mut buf, grid.points(), grid.dim());
    buf
}

fn spectrum_of(grid: &GridSpec, values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    fft::forward(&mut buf, grid.points(), grid.dim());
    buf
}

/// `t ↦ W(t)u₀` on the given times.
pub fn free_trajectory(prop: &Propagator, u0: &SpectralField, times: &[f64]) -> Result<Trajectory> {
    let fields = times.iter().map(|&t| prop.apply(t, u0)).collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

/// `t ↦ ∫_{t_0}^t W(t - τ)F(τ) dτ` with the trapezoid rule in the
/// interaction picture.
pub fn duhamel_forcing(prop: &Propagator, forcing: &Trajectory) -> Result<Trajectory> {
    if forcing.grid() != prop.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *prop.grid();
    let times = forcing.times();
    let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
    let mut prev = evolve_spectrum(prop, -times[0], forcing.first().spectrum());
    let mut fields = vec![SpectralField::zeros(grid)];
    for j in 1..times.len() {
        let g = evolve_spectrum(prop, -times[j], forcing.fields()[j].spectrum());
        let h = 0.5 * (times[j] - times[j - 1]);
        for ((a, x), y) in acc.iter_mut().zip(&prev).zip(&g) {
            *a += h * (x + y);
        }
        fields.push(SpectralField::from_spectrum(grid, evolve_spectrum(prop, times[j], &acc))?);
        prev = g;
    }
    Trajectory::new(times.to_vec(), fields)
}

/// `L^r` norm over the last [`TAIL_SHARE`] of the window relative to the
/// whole window.
fn tail_share(values: &[f64], times: &[f64], r: Exponent) -> Result<f64> {
    let total = time_lp_norm(values, times, r)?;
    if total == 0.0 {
        return Ok(0.0);
    }
    let k = ((times.len() as f64 * TAIL_SHARE).ceil() as usize).clamp(2, times.len());
    let start = times.len() - k;
    Ok(time_lp_norm(&values[start..], &times[start..], r)? / total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzReport {
    /// `L^r_t L^p_x` against `L²` (or the dual Lebesgue norm).
    pub lebesgue: RatioReport,
    /// `l^{s,q}_□(L^r_t L^p_x)` against `M^s_{2,q}` (or the dual Planchon norm).
    pub lifted: RatioReport,
    /// Largest share of the `L^r_t` norm carried by the end of the window.
    pub tail_share: f64,
}

impl StrichartzReport {
    pub fn bounded(&self) -> bool {
        self.lebesgue.bounded() && self.lifted.bounded()
    }
}

/// `‖W(t)u₀‖_{L^r L^p} ≲ ‖u₀‖_{L²}` and its lift
/// `‖W(t)u₀‖_{l^{s,q}_□(L^r L^p)} ≲ ‖u₀‖_{M^s_{2,q}}`.
pub fn check_homogeneous_strichartz(
    setup: &CheckSetup,
    ensemble: &EnsembleSpec,
    inv_p: RecipExponent,
    inv_r: RecipExponent,
    probe: bool,
) -> Result<StrichartzReport> {
    ensemble.validate()?;
    setup.require_admissible(inv_p, inv_r, probe)?;
    let (p, r) = (exponent(inv_p)?, exponent(inv_r)?);
    let partition = setup.partition()?;
    let prop = Propagator::new(setup.coeffs, setup.grid);
    let times = setup.times();
    let grid = setup.grid;
    let data_spec = ModNormSpec::new(Exponent::Finite(2.0), setup.q, setup.s);
    let per_sample = (0..ensemble.count)
        .into_par_iter()
        .map(|i| -> Result<[f64; 5]> {
            let u0 = ensemble.draw(i, 0, grid)?;
            let mut spatial = Vec::with_capacity(times.len());
            let mut rows = Vec::with_capacity(times.len());
            for &t in &times {
                let spec = evolve_spectrum(&prop, t, u0.spectrum());
                spatial.push(lp_of_samples(&values_of(&grid, &spec), p, grid.cell_volume()));
                rows.push(partition.box_norms_from_spectrum(&spec, p));
            }
            Ok([
                time_lp_norm(&spatial, &times, r)?,
                u0.lp_norm(Exponent::Finite(2.0))?,
                partition.planchon_from_rows(&rows, &times, setup.s, setup.q, r)?,
                partition.mod_norm(&u0, &data_spec)?,
                tail_share(&spatial, &times, r)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    strichartz_report(&per_sample, probe)
}

fn strichartz_report(per_sample: &[[f64; 5]], probe: bool) -> Result<StrichartzReport> {
    let lebesgue: Vec<(f64, f64)> = per_sample.iter().map(|v| (v[0], v[1])).collect();
    let lifted: Vec<(f64, f64)> = per_sample.iter().map(|v| (v[2], v[3])).collect();
    Ok(StrichartzReport {
        lebesgue: RatioReport::from_pairs(&lebesgue, probe)?,
        lifted: RatioReport::from_pairs(&lifted, probe)?,
        tail_share: per_sample.iter().map(|v| v[4]).fold(0.0, f64::max),
    })
}

/// Random forcing `F(t) = cos(ωt)·f₁ + sin(ωt)·f₂` with `ω ∈ [0, 2)`.
pub fn random_forcing(ensemble: &EnsembleSpec, sample: usize, grid: GridSpec, times: &[f64]) -> Result<Trajectory> {
    let f1 = ensemble.draw(sample, 0, grid)?;
    let f2 = ensemble.draw(sample, 1, grid)?;
    let omega: f64 = ensemble.rng(sample, 2).random_range(0.0..2.0);
    let fields = times
        .iter()
        .map(|&t| SpectralField::axpy(C64::new((omega * t).cos(), 0.0), &f1, &f2.scale(C64::new((omega * t).sin(), 0.0))))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

/// `‖∫_0^t W(t-τ)F dτ‖_{L^r L^p} ≲ ‖F‖_{L^{r̃} L^{p̃}}` and its Planchon
/// lift, for admissible `(p, r)` and admissible `(p̃', r̃')` given as
/// `dual_p`, `dual_r`.
pub fn check_inhomogeneous_strichartz(
    setup: &CheckSetup,
    ensemble: &EnsembleSpec,
    inv_p: RecipExponent,
    inv_r: RecipExponent,
    dual_p: RecipExponent,
    dual_r: RecipExponent,
    probe: bool,
) -> Result<StrichartzReport> {
    ensemble.validate()?;
    setup.require_admissible(inv_p, inv_r, probe)?;
    setup.require_admissible(dual_p, dual_r, probe)?;
    let (p, r) = (exponent(inv_p)?, exponent(inv_r)?);
    let (pt, rt) = (exponent(dual_p.conjugate())?, exponent(dual_r.conjugate())?);
    let partition = setup.partition()?;
    let prop = Propagator::new(setup.coeffs, setup.grid);
    let times = setup.times();
    let grid = setup.grid;
    let per_sample = (0..ensemble.count)
        .into_par_iter()
        .map(|i| -> Result<[f64; 5]> {
            let forcing = random_forcing(ensemble, i, grid, &times)?;
            let response = duhamel_forcing(&prop, &forcing)?;
            let lebesgue = |u: &Trajectory, p: Exponent| -> Result<Vec<f64>> {
                u.fields().iter().map(|f| f.lp_norm(p)).collect()
            };
            let out = lebesgue(&response, p)?;
            let src = lebesgue(&forcing, pt)?;
            let rows_out = partition.box_norm_rows(&response, p)?;
            let rows_src = partition.box_norm_rows(&forcing, pt)?;
            Ok([
                time_lp_norm(&out, &times, r)?,
                time_lp_norm(&src, &times, rt)?,
                partition.planchon_from_rows(&rows_out, &times, setup.s, setup.q, r)?,
                partition.planchon_from_rows(&rows_src, &times, setup.s, setup.q, rt)?,
                tail_share(&out, &times, r)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    strichartz_report(&per_sample, probe)
}

/// Reciprocal exponents `(1/p̃_j, 1/r̃_j)` of the factors and of the product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSplit {
    pub factors: Vec<(RecipExponent, RecipExponent)>,
    pub product: (RecipExponent, RecipExponent),
}

impl ExponentSplit {
    /// Checks `1/p̃ = Σ 1/p̃_j` and `1/r̃ = Σ 1/r̃_j` exactly.
    pub fn new(factors: Vec<(RecipExponent, RecipExponent)>, product: (RecipExponent, RecipExponent)) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidExponent("a split needs at least one factor".into()));
        }
        let sp: num_rational::Rational64 = factors.iter().map(|f| f.0.recip()).sum();
        let sr: num_rational::Rational64 = factors.iter().map(|f| f.1.recip()).sum();
        if sp != product.0.recip() || sr != product.1.recip() {
            return Err(Error::InvalidExponent(format!(
                "split mismatch: factors sum to ({sp}, {sr}), product has ({}, {})",
                product.0, product.1
            )));
        }
        Ok(ExponentSplit { factors, product })
    }

    /// `n` equal factors; the product exponents are the exact sums.
    pub fn uniform(n: usize, inv_p: RecipExponent, inv_r: RecipExponent) -> Result<Self> {
        let k = num_rational::Rational64::from_integer(n as i64);
        let product = (RecipExponent(inv_p.recip() * k), RecipExponent(inv_r.recip() * k));
        if product.0.recip() > 1.into() || product.1.recip() > 1.into() {
            return Err(Error::InvalidExponent(format!("{n} factors of ({inv_p}, {inv_r}) leave [1, ∞]")));
        }
        Self::new(vec![(inv_p, inv_r); n], product)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoelderMode {
    /// `l^{s,q}_□(L^{r̃} L^{p̃})` norms of free evolutions.
    Planchon,
    /// `M^s_{p̃,q}` norms of fields.
    Modulation,
}

fn pointwise_product(values: &[Vec<C64>]) -> Vec<C64> {
    let mut out = values[0].clone();
    for v in &values[1..] {
        for (a, b) in out.iter_mut().zip(v) {
            *a *= b;
        }
    }
    out
}

/// Both sides of `‖∏ g_j‖_{M^s_{p̃,q}} ≲ ∏ ‖g_j‖_{M^s_{p̃_j,q}}`.
pub fn hoelder_modulation_pair(
    partition: &Partition,
    fields: &[SpectralField],
    split: &ExponentSplit,
    s: f64,
    q: Exponent,
) -> Result<(f64, f64)> {
    if fields.len() != split.len() {
        return Err(Error::InvalidExponent(format!("{} fields for {} exponents", fields.len(), split.len())));
    }
    let grid = *partition.grid();
    let values: Vec<Vec<C64>> = fields.iter().map(|f| f.values().to_vec()).collect();
    let product = SpectralField::from_values(grid, pointwise_product(&values))?;
    let lhs = partition.mod_norm(&product, &ModNormSpec::new(exponent(split.product.0)?, q, s))?;
    let mut rhs = 1.0;
    for (f, e) in fields.iter().zip(&split.factors) {
        rhs *= partition.mod_norm(f, &ModNormSpec::new(exponent(e.0)?, q, s))?;
    }
    Ok((lhs, rhs))
}

/// Both sides of `‖∏ f_j‖_{l^{s,q}_□(L^{r̃}L^{p̃})} ≲ ∏ ‖f_j‖_{l^{s,q}_□(L^{r̃_j}L^{p̃_j})}`.
pub fn hoelder_planchon_pair(
    partition: &Partition,
    factors: &[Trajectory],
    split: &ExponentSplit,
    s: f64,
    q: Exponent,
) -> Result<(f64, f64)> {
    if factors.len() != split.len() {
        return Err(Error::InvalidExponent(format!("{} trajectories for {} exponents", factors.len(), split.len())));
    }
    let times = factors[0].times();
    let grid = *partition.grid();
    let mut product_rows = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let values: Vec<Vec<C64>> = factors.iter().map(|u| u.fields()[j].values().to_vec()).collect();
        let spec = spectrum_of(&grid, &pointwise_product(&values));
        product_rows.push(partition.box_norms_from_spectrum(&spec, exponent(split.product.0)?));
    }
    let lhs = partition.planchon_from_rows(&product_rows, times, s, q, exponent(split.product.1)?)?;
    let mut rhs = 1.0;
    for (u, e) in factors.iter().zip(&split.factors) {
        let rows = partition.box_norm_rows(u, exponent(e.0)?)?;
        rhs *= partition.planchon_from_rows(&rows, times, s, q, exponent(e.1)?)?;
    }
    Ok((lhs, rhs))
}

/// Hölder-like inequality over random tuples. In planchon mode the factors
/// are free evolutions `W(t)g_j`, and their rows are streamed per sample
/// time rather than stored.
pub fn check_hoelder_like(
    setup: &CheckSetup,
    ensemble: &EnsembleSpec,
    split: &ExponentSplit,
    mode: HoelderMode,
    probe: bool,
) -> Result<RatioReport> {
    ensemble.validate()?;
    setup.require_weight(probe)?;
    let partition = setup.partition()?;
    let prop = Propagator::new(setup.coeffs, setup.grid);
    let grid = setup.grid;
    let times = setup.times();
    let (s, q) = (setup.s, setup.q);
    let p_prod = exponent(split.product.0)?;
    let r_prod = exponent(split.product.1)?;
    let factor_exps = split
        .factors
        .iter()
        .map(|e| Ok((exponent(e.0)?, exponent(e.1)?)))
        .collect::<Result<Vec<_>>>()?;
    let pairs = (0..ensemble.count)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let fields = (0..split.len()).map(|slot| ensemble.draw(i, slot, grid)).collect::<Result<Vec<_>>>()?;
            match mode {
                HoelderMode::Modulation => hoelder_modulation_pair(&partition, &fields, split, s, q),
                HoelderMode::Planchon => {
                    let mut product_rows = Vec::with_capacity(times.len());
                    let mut factor_rows = vec![Vec::with_capacity(times.len()); fields.len()];
                    for &t in &times {
                        let mut values = Vec::with_capacity(fields.len());
                        for (k, f) in fields.iter().enumerate() {
                            let spec = evolve_spectrum(&prop, t, f.spectrum());
                            factor_rows[k].push(partition.box_norms_from_spectrum(&spec, factor_exps[k].0));
                            values.push(values_of(&grid, &spec));
                        }
                        let spec = spectrum_of(&grid, &pointwise_product(&values));
                        product_rows.push(partition.box_norms_from_spectrum(&spec, p_prod));
                    }
                    let lhs = partition.planchon_from_rows(&product_rows, &times, s, q, r_prod)?;
                    let mut rhs = 1.0;
                    for (rows, e) in factor_rows.iter().zip(&factor_exps) {
                        rhs *= partition.planchon_from_rows(rows, &times, s, q, e.1)?;
                    }
                    Ok((lhs, rhs))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RatioReport::from_pairs(&pairs, probe)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub boxes: usize,
    pub max: f64,
    pub median: f64,
}

/// Hölder-like ratios in modulation mode for multi-box fields with a
/// growing number of occupied boxes. Meant for weights outside the
/// hypothesis, where the ratio is expected to grow; nothing is asserted.
pub fn hoelder_growth_probe(
    setup: &CheckSetup,
    ensemble: &EnsembleSpec,
    split: &ExponentSplit,
    box_counts: &[usize],
) -> Result<Vec<GrowthPoint>> {
    box_counts
        .iter()
        .map(|&boxes| {
            let ens = EnsembleSpec { law: FieldLaw::MultiBox { boxes }, ..*ensemble };
            let report = check_hoelder_like(setup, &ens, split, HoelderMode::Modulation, true)?;
            Ok(GrowthPoint { boxes, max: report.max, median: report.median })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairLaw {
    /// `u` and `v` drawn independently.
    Independent,
    /// `v = 0`.
    Zero,
}

/// Difference estimate for `π^{m+1}` over random free evolutions.
pub fn check_power_lipschitz(
    setup: &CheckSetup,
    ensemble: &EnsembleSpec,
    pattern: &Pattern,
    exps: &LipschitzExponents,
    pairs: PairLaw,
    probe: bool,
) -> Result<RatioReport> {
    ensemble.validate()?;
    if !probe && !weight_admissible(exps.q, exps.s, setup.grid.dim()) {
        return Err(Error::Hypothesis(format!("weight s = {} is not admissible for q = {}", exps.s, exps.q)));
    }
    let partition = setup.partition()?;
    let prop = Propagator::new(setup.coeffs, setup.grid);
    let times = setup.times();
    let grid = setup.grid;
    let out = (0..ensemble.count)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let u = free_trajectory(&prop, &ensemble.draw(i, 0, grid)?, &times)?;
            let v = match pairs {
                PairLaw::Independent => free_trajectory(&prop, &ensemble.draw(i, 1, grid)?, &times)?,
                PairLaw::Zero => Trajectory::stationary(SpectralField::zeros(grid), times.clone())?,
            };
            power_lipschitz_witness(&partition, pattern, &u, &v, exps)
        })
        .collect::<Result<Vec<_>>>()?;
    RatioReport::from_pairs(&out, probe)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingExponents {
    pub s: f64,
    pub q: Exponent,
    pub r: Exponent,
    pub p1: Exponent,
    pub p2: Exponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// `‖u‖_{L^r M^s_{p₁,q}}` against `‖u‖_{l^{s,q}_□(L^r L^{p₁})}`.
    pub minkowski: RatioReport,
    /// `‖u‖_{l^{s,q}_□(L^r L^{p₂})}` against `‖u‖_{l^{s,q}_□(L^r L^{p₁})}`.
    pub bernstein: RatioReport,
}

impl EmbeddingReport {
    pub fn bounded(&self) -> bool {
        self.minkowski.bounded() && self.bernstein.bounded()
    }
}

/// Both sides of the two embeddings for one trajectory:
/// `[minkowski lhs, planchon p₁, planchon p₂]`.
pub fn embedding_sides(partition: &Partition, u: &Trajectory, e: &EmbeddingExponents) -> Result<[f64; 3]> {
    let times = u.times();
    let rows1 = partition.box_norm_rows(u, e.p1)?;
    let rows2 = partition.box_norm_rows(u, e.p2)?;
    let per_time: Vec<f64> = rows1.iter().map(|row| partition.aggregate(row, e.s, e.q)).collect();
    Ok([
        time_lp_norm(&per_time, times, e.r)?,
        partition.planchon_from_rows(&rows1, times, e.s, e.q, e.r)?,
        partition.planchon_from_rows(&rows2, times, e.s, e.q, e.r)?,
    ])
}

/// Minkowski (`q ≤ r`) and Bernstein (`p₁ ≤ p₂`) embeddings over random
/// free evolutions.
pub fn check_embeddings(setup: &CheckSetup, ensemble: &EnsembleSpec, e: &EmbeddingExponents) -> Result<EmbeddingReport> {
    ensemble.validate()?;
    if e.q.value() > e.r.value() {
        return Err(Error::InvalidExponent(format!("Minkowski embedding needs q <= r, got q = {}, r = {}", e.q, e.r)));
    }
    if e.p1.value() > e.p2.value() {
        return Err(Error::InvalidExponent(format!("Bernstein embedding needs p1 <= p2, got {} > {}", e.p1, e.p2)));
    }
    let partition = setup.partition()?;
    let prop = Propagator::new(setup.coeffs, setup.grid);
    let times = setup.times();
    let grid = setup.grid;
    let sides = (0..ensemble.count)
        .into_par_iter()
        .map(|i| embedding_sides(&partition, &free_trajectory(&prop, &ensemble.draw(i, 0, grid)?, &times)?, e))
        .collect::<Result<Vec<_>>>()?;
    let mink: Vec<(f64, f64)> = sides.iter().map(|v| (v[0], v[1])).collect();
    let bern: Vec<(f64, f64)> = sides.iter().map(|v| (v[2], v[1])).collect();
    Ok(EmbeddingReport { minkowski: RatioReport::from_pairs(&mink, false)?, bernstein: RatioReport::from_pairs(&bern, false)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `‖f‖` with the bump partition over `‖f‖` with the trigonometric window.
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Smallest `C*` with every ratio in `[1/C*, C*]`.
    pub c_star: f64,
}

/// Compare the modulation norm under the two partition families.
pub fn partition_equivalence(grid: GridSpec, k_max: i64, ensemble: &EnsembleSpec, spec: &ModNormSpec) -> Result<EquivalenceReport> {
    ensemble.validate()?;
    let bump = Partition::build(PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max }, grid)?;
    let trig = Partition::build(PartitionSpec { kind: PartitionKind::TrigonometricWindow, k_max }, grid)?;
    let ratios = (0..ensemble.count)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let f = ensemble.draw(i, 0, grid)?;
            let a = bump.mod_norm(&f, spec)?;
            let b = trig.mod_norm(&f, spec)?;
            Ok((b > 0.0).then(|| a / b))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<f64>>();
    if ratios.is_empty() {
        return Err(Error::InvalidEnsemble("no nonzero samples".into()));
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport { c_star: max.max(1.0 / min), ratios, min, max })
}
