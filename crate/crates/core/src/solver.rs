//! Duhamel fixed point, Picard iteration, split-step oracle and scattering.
//!
//! The evolution solved throughout is `∂_t u = iφ(D)u + i f(u)` with `φ` the
//! symbol of [`crate::dispersion`]. Integrals are taken in the interaction
//! picture: with `G(τ) = e^{-iφτ} F[f(u(τ))]` and `S(t) = ∫ G`,
//! `F[u(t)] = e^{iφt}(F[u₀] + i S(t))`, and the time integral is the
//! trapezoid rule on the trajectory's samples.

use num_complex::Complex64 as C64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{self, EquationCoeffs, Propagator, RecipExponent};
use crate::error::{Error, Result};
use crate::modspace::{weight_admissible, ModNormSpec, Partition, PartitionSpec};
use crate::nonlinear::NonlinSpec;
use crate::spectral::{fft, uniform_times, Exponent, GridSpec, SpectralField, Trajectory};

/// Default largest split-step substep.
pub const DEFAULT_ORACLE_DT: f64 = 1.0 / 512.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_minus: f64,
    pub t_plus: f64,
    /// Number of sample intervals `N_t`; there are `N_t + 1` samples.
    pub steps: usize,
}

impl TimeWindow {
    pub fn times(&self) -> Vec<f64> {
        uniform_times(self.t_minus, self.t_plus, self.steps)
    }

    pub fn length(&self) -> f64 {
        self.t_plus - self.t_minus
    }
}

/// `(s, q, r, p)` of the solution space `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionNorms {
    pub s: f64,
    pub q: Exponent,
    pub r: Exponent,
    pub p: Exponent,
}

impl SolutionNorms {
    pub fn data_spec(&self) -> ModNormSpec {
        ModNormSpec::new(Exponent::Finite(2.0), self.q, self.s)
    }
}

/// How to read the `q = 1` weight condition for the exponential nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpWeightReading {
    /// `s ≥ 0`, as for power nonlinearities.
    #[default]
    NonNegative,
    /// `s ≥ p`, as literally printed.
    AtLeastP,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisPolicy {
    /// Reject violated hypotheses; otherwise they are recorded as warnings.
    pub enforce: bool,
    pub exp_weight_reading: ExpWeightReading,
}

impl Default for HypothesisPolicy {
    fn default() -> Self {
        HypothesisPolicy { enforce: true, exp_weight_reading: ExpWeightReading::NonNegative }
    }
}

fn default_max_iters() -> usize {
    60
}

fn default_tol() -> f64 {
    1e-12
}

fn default_oracle_dt() -> f64 {
    DEFAULT_ORACLE_DT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub coeffs: EquationCoeffs,
    pub nonlin: NonlinSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub window: TimeWindow,
    pub delta: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub norms: SolutionNorms,
    #[serde(default)]
    pub hypotheses: HypothesisPolicy,
    #[serde(default = "default_oracle_dt")]
    pub oracle_dt: f64,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.window;
        if !(w.t_minus < w.t_plus) || !w.t_minus.is_finite() || !w.t_plus.is_finite() {
            return Err(Error::InvalidTrajectory(format!("window [{}, {}] is empty", w.t_minus, w.t_plus)));
        }
        if w.steps == 0 {
            return Err(Error::InvalidTrajectory("window needs at least one step".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Hypothesis(format!("ball radius delta = {} must be positive", self.delta)));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidTrajectory("tolerance and iteration budget must be positive".into()));
        }
        if !(self.oracle_dt > 0.0) {
            return Err(Error::StepTooLarge(format!("oracle step {} must be positive", self.oracle_dt)));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.window.times()
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::build(self.partition, self.grid)
    }

    pub fn propagator(&self) -> Propagator {
        Propagator::new(self.coeffs, self.grid)
    }
}

fn to_recip(e: Exponent) -> RecipExponent {
    match e {
        Exponent::Infinity => RecipExponent::INFINITY,
        Exponent::Finite(p) => RecipExponent(Rational64::approximate_float(1.0 / p).unwrap_or_default()),
    }
}

/// Theorem-level hypotheses for a solve: `d ≥ 2`, `m ≥ m₀`, `1/r ∈ I`,
/// `1/p ∈ J`, the weight condition on `s`, and for scattering `q ≤ m+1`.
/// Returns the list of violations; with an enforcing policy the first
/// violation is an error.
pub fn check_hypotheses(cfg: &SolveConfig, scattering: bool) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    let d = cfg.grid.dim() as i64;
    let gn = cfg.coeffs.gamma_nonzero();
    let n = &cfg.norms;
    // exponential: every |u|^{2m}u term must be covered, hence I_{3,d}
    let m = cfg.nonlin.degree().map(|m| m as i64).unwrap_or(3);
    if d < 2 {
        violations.push(format!("d = {d} is outside the theory (d >= 2)"));
    } else {
        let m0 = dispersion::compute_m0(d, gn)?;
        if cfg.nonlin.degree().is_some() && m < m0 {
            violations.push(format!("m = {m} violates m >= m0 = {m0}"));
        } else {
            let i = dispersion::interval_i(m.max(m0), d, gn)?;
            let inv_r = to_recip(n.r).recip();
            if !i.contains(inv_r) {
                violations.push(format!("1/r = {inv_r} is outside I = [{}, {}]", i.lo, i.hi));
            } else {
                let l = dispersion::effective_l(inv_r, m.max(m0), m0)?;
                let j = dispersion::interval_j(inv_r, d, gn, l)?;
                let inv_p = to_recip(n.p).recip();
                if !j.contains(inv_p) {
                    violations.push(format!("1/p = {inv_p} is outside J = [{}, {}]", j.lo, j.hi));
                }
            }
        }
    }
    let q1 = n.q == Exponent::Finite(1.0);
    let weight_ok = match (&cfg.nonlin, cfg.hypotheses.exp_weight_reading) {
        (NonlinSpec::Exponential { .. }, ExpWeightReading::AtLeastP) if q1 => n.s >= n.p.value(),
        _ => weight_admissible(n.q, n.s, cfg.grid.dim()),
    };
    if !weight_ok {
        violations.push(format!("weight s = {} is not admissible for q = {}", n.s, n.q));
    }
    if scattering {
        let cap = cfg.nonlin.degree().map(|m| m as f64 + 1.0).unwrap_or(3.0);
        if n.q.value() > cap {
            violations.push(format!("scattering needs q <= {cap}, got q = {}", n.q));
        }
    }
    if cfg.hypotheses.enforce {
        if let Some(first) = violations.first() {
            return Err(Error::Hypothesis(first.clone()));
        }
    }
    Ok(violations)
}

/// Where the Duhamel integral starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerLimit {
    /// `∫_0^t`; the time grid must contain `t = 0`.
    Zero,
    /// `∫_{-∞}^t`, approximated by `∫_{T₋}^t`.
    MinusInfinity,
}

fn anchor_index(times: &[f64], lower: LowerLimit) -> Result<usize> {
    match lower {
        LowerLimit::MinusInfinity => Ok(0),
        LowerLimit::Zero => {
            let scale = times.iter().fold(1.0f64, |a, t| a.max(t.abs()));
            times
                .iter()
                .position(|t| t.abs() <= 1e-12 * scale)
                .ok_or_else(|| Error::InvalidTrajectory("time grid does not contain t = 0".into()))
        }
    }
}

fn phasor(prop: &Propagator, t: f64) -> Vec<C64> {
    prop.phase().iter().map(|&ph| C64::from_polar(1.0, ph * t)).collect()
}

/// `e^{-iφt} F[f(u)]` from spatial samples of `u`.
fn interaction_source(nonlin: &NonlinSpec, values: &[C64], grid: &GridSpec, conj_phase: impl Iterator<Item = C64>) -> Result<Vec<C64>> {
    let mut buf = values.to_vec();
    nonlin.eval_slice(&mut buf)?;
    fft::forward(&mut buf, grid.points(), grid.dim());
    for (z, c) in buf.iter_mut().zip(conj_phase) {
        *z *= c;
    }
    Ok(buf)
}

/// `e^{iφt}(base + i·s)` to spatial samples.
fn values_from_state(p: &[C64], base: &[C64], s: &[C64], grid: &GridSpec) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    let mut buf: Vec<C64> = p.iter().zip(base).zip(s).map(|((p, b), s)| p * (b + i * s)).collect();
    fft::inverse(&mut buf, grid.points(), grid.dim());
    buf
}

/// `𝒯u(t_j) = W(t_j)u₀ + i∫ W(t_j - τ) f(u(τ)) dτ` on the samples of `u`.
pub fn duhamel_apply(cfg: &SolveConfig, u: &Trajectory, u0: &SpectralField, lower: LowerLimit) -> Result<Trajectory> {
    if *u.grid() != cfg.grid || *u0.grid() != cfg.grid {
        return Err(Error::GridMismatch);
    }
    let times = u.times();
    let anchor = anchor_index(times, lower)?;
    let prop = cfg.propagator();
    let grid = cfg.grid;
    let len = grid.len();
    let base = u0.spectrum().to_vec();

    let sources = times
        .iter()
        .zip(u.fields())
        .map(|(&t, f)| interaction_source(&cfg.nonlin, f.values(), &grid, prop.phase().iter().map(move |&ph| C64::from_polar(1.0, -ph * t))))
        .collect::<Result<Vec<_>>>()?;

    let mut state = vec![vec![C64::new(0.0, 0.0); len]; times.len()];
    for j in anchor + 1..times.len() {
        let h = 0.5 * (times[j] - times[j - 1]);
        let (done, rest) = state.split_at_mut(j);
        for (k, out) in rest[0].iter_mut().enumerate() {
            *out = done[j - 1][k] + h * (sources[j - 1][k] + sources[j][k]);
        }
    }
    for j in (0..anchor).rev() {
        let h = 0.5 * (times[j + 1] - times[j]);
        let (head, tail) = state.split_at_mut(j + 1);
        for (k, out) in head[j].iter_mut().enumerate() {
            *out = tail[0][k] - h * (sources[j + 1][k] + sources[j][k]);
        }
    }
    drop(sources);
    let fields = times
        .iter()
        .zip(&state)
        .map(|(&t, s)| SpectralField::from_values(grid, values_from_state(&phasor(&prop, t), &base, s, &grid)))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    /// `‖f(u(T))‖_{M^s_{2,q}}·(T₊ - T₋)/2` at the relevant window end.
    pub estimate: f64,
    /// `‖u(t) - W(t)u₀^∓‖_{M^s_{2,q}}` on the samples nearest the window end,
    /// ordered toward that end.
    pub sequence: Vec<f64>,
    /// The sequence decreases toward the window end.
    pub monotone: bool,
    /// The defect at the window end itself.
    pub end_defect: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖u^{n+1} - u^n‖_X` per iteration.
    pub differences: Vec<f64>,
    pub final_x_norm: f64,
    /// Largest ratio of successive differences above the rounding floor.
    pub contraction_factor: f64,
    pub oracle_deviation: Option<f64>,
    /// `‖u₀‖_{M^s_{2,q}}`.
    pub data_norm: f64,
    pub delta: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailReport>,
}

impl SolveReport {
    /// Whether differences decrease strictly from the second iteration on,
    /// ignoring those at the rounding floor.
    pub fn differences_monotone(&self, floor: f64) -> bool {
        self.differences.windows(2).skip(1).all(|w| w[1] <= w[0] || w[0] <= floor)
    }

    /// Length of the longest run of strictly decreasing differences above
    /// `floor`, counted in iterations.
    pub fn geometric_run(&self, floor: f64) -> usize {
        let mut best = 0;
        let mut run = 0;
        for w in self.differences.windows(2) {
            if w[0] > floor && w[1] > floor && w[1] < w[0] {
                run = if run == 0 { 2 } else { run + 1 };
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }
}

fn contraction_estimate(diffs: &[f64], floor: f64) -> f64 {
    diffs
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

/// Picard iteration `u^{n+1} = 𝒯u^n` from `u^0(t) = W(t)u₀`.
///
/// Only the interaction-picture integral `S_j` is kept per sample and is
/// updated in place: the source at `t_j` depends only on the old iterate at
/// `t_j`, so sweeping outward from the anchor sample is exact Picard.
pub fn picard_iterate(cfg: &SolveConfig, u0: &SpectralField, lower: LowerLimit) -> Result<(Trajectory, SolveReport)> {
    cfg.validate()?;
    if *u0.grid() != cfg.grid {
        return Err(Error::GridMismatch);
    }
    let mut warnings = check_hypotheses(cfg, lower == LowerLimit::MinusInfinity)?;
    let partition = cfg.partition()?;
    let data_norm = partition.mod_norm(u0, &cfg.norms.data_spec())?;
    if data_norm > 0.5 * cfg.delta {
        let msg = format!("data norm {data_norm:.4e} exceeds delta/2 = {:.4e}", 0.5 * cfg.delta);
        if cfg.hypotheses.enforce {
            return Err(Error::Hypothesis(msg));
        }
        warnings.push(msg);
    }

    let times = cfg.times();
    let anchor = anchor_index(&times, lower)?;
    let prop = cfg.propagator();
    let grid = cfg.grid;
    let len = grid.len();
    let n_t = times.len();
    let base = u0.spectrum().to_vec();
    let norms = cfg.norms;
    let two = Exponent::Finite(2.0);
    let i = C64::new(0.0, 1.0);

    let mut state = vec![vec![C64::new(0.0, 0.0); len]; n_t];
    let mut report = SolveReport { data_norm, delta: cfg.delta, warnings, ..SolveReport::default() };
    let zero_rows = vec![0.0; partition.boxes().len()];
    let mut rows_e = vec![zero_rows.clone(); n_t];
    let mut rows_s = vec![zero_rows.clone(); n_t];

    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let mut anchor_source: Option<Vec<C64>> = None;
        // forward sweep, then backward sweep from the anchor
        for backward in [false, true] {
            let order: Vec<usize> = if backward { (0..anchor).rev().collect() } else { (anchor..n_t).collect() };
            let mut prev: Option<Vec<C64>> = if backward { anchor_source.clone() } else { None };
            for j in order {
                let p = phasor(&prop, times[j]);
                let values = values_from_state(&p, &base, &state[j], &grid);
                let g = interaction_source(&cfg.nonlin, &values, &grid, p.iter().map(|z| z.conj()))?;
                if j == anchor {
                    anchor_source = Some(g.clone());
                    prev = Some(g);
                    continue;
                }
                let (nb, h) = if backward { (j + 1, -0.5 * (times[j + 1] - times[j])) } else { (j - 1, 0.5 * (times[j] - times[j - 1])) };
                let g_nb = prev.as_ref().expect("neighbour source");
                let mut diff = vec![C64::new(0.0, 0.0); len];
                let (lo, hi) = state.split_at_mut(j.max(nb));
                let (cur, nbr) = if nb < j { (&mut hi[0], &lo[nb]) } else { (&mut lo[j], &hi[0]) };
                for k in 0..len {
                    let new = nbr[k] + h * (g_nb[k] + g[k]);
                    diff[k] = p[k] * i * (new - cur[k]);
                    cur[k] = new;
                }
                rows_e[j] = partition.box_norms_from_spectrum(&diff, two);
                rows_s[j] = partition.box_norms_from_spectrum(&diff, norms.p);
                prev = Some(g);
            }
        }
        let dx = partition.planchon_from_rows(&rows_e, &times, norms.s, norms.q, Exponent::Infinity)?
            + partition.planchon_from_rows(&rows_s, &times, norms.s, norms.q, norms.r)?;
        report.iterations = iter + 1;
        report.differences.push(dx);
        if !dx.is_finite() {
            return Err(Error::NonContraction(Box::new(report)));
        }
        let k = report.differences.len();
        if k >= 3 && report.differences[k - 1] > report.differences[k - 2] && report.differences[k - 2] > report.differences[k - 3] && dx > cfg.tol {
            report.contraction_factor = contraction_estimate(&report.differences, 0.0);
            return Err(Error::NonContraction(Box::new(report)));
        }
        if dx <= cfg.tol {
            converged = true;
            break;
        }
    }

    // final iterate, its X-norm, and the size of the nonlinear correction
    let mut fields = Vec::with_capacity(n_t);
    let mut rows_ue = Vec::with_capacity(n_t);
    let mut rows_us = Vec::with_capacity(n_t);
    let mut rows_ce = Vec::with_capacity(n_t);
    let mut rows_cs = Vec::with_capacity(n_t);
    let zeros = vec![C64::new(0.0, 0.0); len];
    for (j, s) in state.iter_mut().enumerate() {
        let p = phasor(&prop, times[j]);
        let spec: Vec<C64> = p.iter().zip(&base).zip(s.iter()).map(|((p, b), s)| p * (b + i * s)).collect();
        let corr: Vec<C64> = p.iter().zip(s.iter()).map(|(p, s)| p * i * s).collect();
        rows_ue.push(partition.box_norms_from_spectrum(&spec, two));
        rows_us.push(partition.box_norms_from_spectrum(&spec, norms.p));
        rows_ce.push(partition.box_norms_from_spectrum(&corr, two));
        rows_cs.push(partition.box_norms_from_spectrum(&corr, norms.p));
        let mut buf = spec;
        fft::inverse(&mut buf, grid.points(), grid.dim());
        fields.push(SpectralField::from_values(grid, buf)?);
        *s = zeros.clone();
        s.shrink_to_fit();
    }
    drop(state);
    report.final_x_norm = partition.planchon_from_rows(&rows_ue, &times, norms.s, norms.q, Exponent::Infinity)?
        + partition.planchon_from_rows(&rows_us, &times, norms.s, norms.q, norms.r)?;
    let correction = partition.planchon_from_rows(&rows_ce, &times, norms.s, norms.q, Exponent::Infinity)?
        + partition.planchon_from_rows(&rows_cs, &times, norms.s, norms.q, norms.r)?;
    let floor = rounding_floor(correction);
    report.contraction_factor = contraction_estimate(&report.differences, floor);
    if report.final_x_norm > cfg.delta {
        report.warnings.push(format!("solution X-norm {:.4e} leaves the ball of radius {:.4e}", report.final_x_norm, cfg.delta));
    }
    if !converged {
        return Err(Error::MaxIterations(Box::new(report)));
    }
    if report.contraction_factor >= 1.0 {
        return Err(Error::NonContraction(Box::new(report)));
    }
    Ok((Trajectory::new(times, fields)?, report))
}

/// Differences below this size are dominated by rounding in the integral.
pub fn rounding_floor(correction_norm: f64) -> f64 {
    1e3 * f64::EPSILON * correction_norm
}

/// Picard solve of the Cauchy problem with data at `t = 0`.
pub fn picard_solve(cfg: &SolveConfig, u0: &SpectralField) -> Result<(Trajectory, SolveReport)> {
    picard_iterate(cfg, u0, LowerLimit::Zero)
}

/// Exact flow of `∂_t u = i f(u)` over `dt`, pointwise.
struct NonlinearFlow<'a> {
    nonlin: &'a NonlinSpec,
    rate: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl<'a> NonlinearFlow<'a> {
    fn new(nonlin: &'a NonlinSpec) -> Self {
        NonlinearFlow { nonlin, rate: nonlin.real_gauge_rate() }
    }

    fn step(&self, values: &mut [C64], dt: f64) -> Result<()> {
        if self.nonlin.is_zero() {
            return Ok(());
        }
        if let NonlinSpec::Exponential { rho, .. } = self.nonlin {
            let sup2 = values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            if rho * sup2 > crate::nonlinear::EXP_OVERFLOW_LIMIT {
                return Err(Error::Overflow(rho * sup2));
            }
        }
        let i = C64::new(0.0, 1.0);
        match &self.rate {
            Some(rate) => {
                for z in values.iter_mut() {
                    *z *= C64::from_polar(1.0, rate(z.norm_sqr()) * dt);
                }
            }
            None => {
                let f = |z: C64| i * self.nonlin.eval(z);
                for z in values.iter_mut() {
                    let k1 = f(*z);
                    let k2 = f(*z + 0.5 * dt * k1);
                    let k3 = f(*z + 0.5 * dt * k2);
                    let k4 = f(*z + dt * k3);
                    *z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
            }
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("split-step nonlinear flow"));
        }
        Ok(())
    }
}

/// Strang splitting with at most `max_dt` per substep, starting from
/// `start` at sample `anchor` and marching outward in both directions.
pub fn split_step_from(
    coeffs: &EquationCoeffs,
    nonlin: &NonlinSpec,
    times: &[f64],
    anchor: usize,
    start: &SpectralField,
    max_dt: f64,
) -> Result<Trajectory> {
    if !(max_dt > 0.0) {
        return Err(Error::StepTooLarge(format!("substep {max_dt} must be positive")));
    }
    if anchor >= times.len() {
        return Err(Error::InvalidTrajectory("anchor outside the time grid".into()));
    }
    let grid = *start.grid();
    let prop = Propagator::new(*coeffs, grid);
    let flow = NonlinearFlow::new(nonlin);
    let mut out: Vec<Option<SpectralField>> = vec![None; times.len()];
    out[anchor] = Some(start.clone());

    let mut march = |indices: Vec<usize>| -> Result<()> {
        let mut current = start.values().to_vec();
        let mut t_prev = times[anchor];
        for j in indices {
            let span = times[j] - t_prev;
            let k = (span.abs() / max_dt).ceil().max(1.0) as usize;
            let h = span / k as f64;
            let half: Vec<C64> = prop.phase().iter().map(|&ph| C64::from_polar(1.0, 0.5 * ph * h)).collect();
            let full: Vec<C64> = half.iter().map(|z| z * z).collect();
            let linear = |v: &mut Vec<C64>, table: &[C64]| {
                fft::forward(v, grid.points(), grid.dim());
                for (z, e) in v.iter_mut().zip(table) {
                    *z *= e;
                }
                fft::inverse(v, grid.points(), grid.dim());
            };
            linear(&mut current, &half);
            for step in 0..k {
                flow.step(&mut current, h)?;
                linear(&mut current, if step + 1 == k { &half } else { &full });
            }
            out[j] = Some(SpectralField::from_values(grid, current.clone())?);
            t_prev = times[j];
        }
        Ok(())
    };
    march((anchor + 1..times.len()).collect())?;
    march((0..anchor).rev().collect())?;
    Trajectory::new(times.to_vec(), out.into_iter().map(|f| f.expect("every sample visited")).collect())
}

/// Independent integrator for the configured problem with data `u₀` at `t = 0`.
pub fn split_step_oracle(cfg: &SolveConfig, u0: &SpectralField) -> Result<Trajectory> {
    cfg.validate()?;
    let times = cfg.times();
    let anchor = anchor_index(&times, LowerLimit::Zero)?;
    split_step_from(&cfg.coeffs, &cfg.nonlin, &times, anchor, u0, cfg.oracle_dt)
}

/// Oracle for the `-∞` problem as truncated to the window: starts from
/// `W(T₋)u₀⁻` at `T₋`.
pub fn split_step_oracle_minus(cfg: &SolveConfig, u0_minus: &SpectralField) -> Result<Trajectory> {
    cfg.validate()?;
    let times = cfg.times();
    let start = cfg.propagator().apply(times[0], u0_minus)?;
    split_step_from(&cfg.coeffs, &cfg.nonlin, &times, 0, &start, cfg.oracle_dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCheck {
    /// `sup_t ‖u_h - u_{h/2}‖_{L²}`.
    pub coarse: f64,
    /// `sup_t ‖u_{h/2} - u_{h/4}‖_{L²}`.
    pub fine: f64,
    pub ratio: f64,
}

/// Richardson check of the oracle's order at base step `max_dt`. A ratio
/// well below 4 means the step is outside the asymptotic regime.
pub fn oracle_step_check(cfg: &SolveConfig, u0: &SpectralField, max_dt: f64) -> Result<StepCheck> {
    let times = cfg.times();
    let anchor = anchor_index(&times, LowerLimit::Zero)?;
    let run = |dt: f64| split_step_from(&cfg.coeffs, &cfg.nonlin, &times, anchor, u0, dt);
    let a = run(max_dt)?;
    let b = run(max_dt / 2.0)?;
    let coarse = sup_l2_distance(&a, &b)?;
    drop(a);
    let c = run(max_dt / 4.0)?;
    let fine = sup_l2_distance(&b, &c)?;
    let ratio = if fine > 0.0 { coarse / fine } else { f64::INFINITY };
    let floor = 1e3 * f64::EPSILON * sup_l2(&c)?;
    if coarse > floor && ratio < 2.0 {
        return Err(Error::StepTooLarge(format!("step halving ratio {ratio:.3} at dt = {max_dt}")));
    }
    Ok(StepCheck { coarse, fine, ratio })
}

/// `‖u‖²_{L²}`.
pub fn mass(u: &SpectralField) -> f64 {
    u.mass()
}

/// `max_j |mass(u_j) - mass(u_0)| / mass(u_0)`.
pub fn mass_drift(u: &Trajectory) -> f64 {
    let m0 = mass(u.first());
    if m0 == 0.0 {
        return 0.0;
    }
    u.fields().iter().map(|f| (mass(f) - m0).abs() / m0).fold(0.0, f64::max)
}

pub fn sup_l2(u: &Trajectory) -> Result<f64> {
    u.fields().iter().map(|f| f.lp_norm(Exponent::Finite(2.0))).try_fold(0.0f64, |a, b| Ok(a.max(b?)))
}

/// `sup_j ‖u_j - v_j‖_{L²}`.
pub fn sup_l2_distance(u: &Trajectory, v: &Trajectory) -> Result<f64> {
    if u.times() != v.times() {
        return Err(Error::InvalidTrajectory("time grids differ".into()));
    }
    u.fields()
        .iter()
        .zip(v.fields())
        .map(|(a, b)| a.sub(b)?.lp_norm(Exponent::Finite(2.0)))
        .try_fold(0.0f64, |acc, x| Ok(acc.max(x?)))
}

/// `(absolute, relative)` deviation in `L^∞_t L²_x`, relative to the oracle.
pub fn oracle_deviation(u: &Trajectory, oracle: &Trajectory) -> Result<(f64, f64)> {
    let abs = sup_l2_distance(u, oracle)?;
    let scale = sup_l2(oracle)?;
    Ok((abs, if scale > 0.0 { abs / scale } else { abs }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub max_jump: f64,
    /// `max_t ‖∂_t u‖_{M^s_{2,q}}·Δt`, inflated by a safety factor of 1.5.
    pub bound: f64,
    pub pass: bool,
}

/// Jumps of `t ↦ ‖u(t)‖_{M^s_{2,q}}` against the modulus `C·Δt` with
/// `C = max ‖iφ(D)u + i f(u)‖_{M^s_{2,q}}` over the samples.
pub fn continuity_check(cfg: &SolveConfig, partition: &Partition, u: &Trajectory) -> Result<ContinuityReport> {
    let spec = cfg.norms.data_spec();
    let prop = cfg.propagator();
    let two = Exponent::Finite(2.0);
    let mut norms = Vec::with_capacity(u.len());
    let mut rate: f64 = 0.0;
    for f in u.fields() {
        norms.push(partition.mod_norm(f, &spec)?);
        let nl = cfg.nonlin.apply(f)?;
        let dt: Vec<C64> = f
            .spectrum()
            .iter()
            .zip(nl.spectrum())
            .zip(prop.phase())
            .map(|((z, g), ph)| C64::new(0.0, 1.0) * (ph * z + g))
            .collect();
        let rows = partition.box_norms_from_spectrum(&dt, two);
        rate = rate.max(partition.aggregate(&rows, spec.s, spec.q));
    }
    let times = u.times();
    let mut max_jump: f64 = 0.0;
    let mut pass = true;
    let mut bound: f64 = 0.0;
    for (w, t) in norms.windows(2).zip(times.windows(2)) {
        let jump = (w[1] - w[0]).abs();
        let allowed = 1.5 * rate * (t[1] - t[0]);
        max_jump = max_jump.max(jump);
        bound = bound.max(allowed);
        if jump > allowed + 1e-14 * w[0].max(w[1]) {
            pass = false;
        }
    }
    Ok(ContinuityReport { max_jump, bound, pass })
}

fn end_tail_estimate(cfg: &SolveConfig, partition: &Partition, end: &SpectralField) -> Result<f64> {
    let nl = cfg.nonlin.apply(end)?;
    Ok(partition.mod_norm(&nl, &cfg.norms.data_spec())? * 0.5 * cfg.window.length())
}

fn tail_len(n: usize) -> usize {
    (n / 10).max(2).min(n)
}

/// Fixed point of `S₋u = W(t)u₀⁻ + i∫_{-∞}^t W(t-τ) f(u(τ)) dτ` on the window.
pub fn scatter_minus(cfg: &SolveConfig, u0_minus: &SpectralField) -> Result<(Trajectory, SolveReport)> {
    let (u, mut report) = picard_iterate(cfg, u0_minus, LowerLimit::MinusInfinity)?;
    let partition = cfg.partition()?;
    let spec = cfg.norms.data_spec();
    let prop = cfg.propagator();
    let k = tail_len(u.len());
    let mut sequence = Vec::with_capacity(k);
    for j in (0..k).rev() {
        let free = prop.apply(u.times()[j], u0_minus)?;
        sequence.push(partition.mod_norm(&u.fields()[j].sub(&free)?, &spec)?);
    }
    let monotone = sequence.windows(2).all(|w| w[1] <= w[0]);
    let estimate = end_tail_estimate(cfg, &partition, u.first())?;
    let end_defect = *sequence.last().expect("non-empty tail");
    report.tail = Some(TailReport { estimate, sequence, monotone, end_defect });
    Ok((u, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveOperatorReport {
    /// `‖W(-T₊)u(T₊) - u₀⁺‖_{M^s_{2,q}}`.
    pub scattering_defect: f64,
    /// Richardson estimate `‖I_h - I_{2h}‖/3` of the window quadrature.
    pub quadrature_tolerance: f64,
    pub tail: TailReport,
    /// `‖u₀⁺‖_{M^s_{2,q}}`.
    pub norm_plus: f64,
    /// `‖u₀⁺ - u₀⁻‖_{M^s_{2,q}}`.
    pub change: f64,
}

/// `u₀⁺ = u₀⁻ + i∫ W(-τ) f(u(τ)) dτ` over the window.
pub fn wave_operator_plus(cfg: &SolveConfig, u: &Trajectory, u0_minus: &SpectralField) -> Result<(SpectralField, WaveOperatorReport)> {
    if *u.grid() != cfg.grid || *u0_minus.grid() != cfg.grid {
        return Err(Error::GridMismatch);
    }
    let n = u.len() - 1;
    if n % 2 != 0 || n < 2 {
        return Err(Error::InvalidTrajectory(format!("quadrature check needs an even number of intervals, got {n}")));
    }
    let partition = cfg.partition()?;
    let spec = cfg.norms.data_spec();
    let prop = cfg.propagator();
    let grid = cfg.grid;
    let len = grid.len();
    let times = u.times();
    let zero = C64::new(0.0, 0.0);
    let mut fine = vec![zero; len];
    let mut coarse = vec![zero; len];
    let mut sources: Vec<Vec<C64>> = Vec::with_capacity(n + 1);
    // keep only the sources needed for the running sums
    for j in 0..=n {
        let t = times[j];
        let g = interaction_source(&cfg.nonlin, u.fields()[j].values(), &grid, prop.phase().iter().map(|&ph| C64::from_polar(1.0, -ph * t)))?;
        sources.push(g);
        if j >= 1 {
            let h = 0.5 * (times[j] - times[j - 1]);
            for k in 0..len {
                fine[k] += h * (sources[j - 1][k] + sources[j][k]);
            }
        }
        if j >= 2 && j % 2 == 0 {
            let h = 0.5 * (times[j] - times[j - 2]);
            for k in 0..len {
                coarse[k] += h * (sources[j - 2][k] + sources[j][k]);
            }
        }
        if j >= 2 {
            sources[j - 2] = Vec::new();
        }
    }
    drop(sources);
    let i = C64::new(0.0, 1.0);
    let plus_spec: Vec<C64> = u0_minus.spectrum().iter().zip(&fine).map(|(b, s)| b + i * s).collect();
    let u0_plus = SpectralField::from_spectrum(grid, plus_spec)?;
    let two = Exponent::Finite(2.0);
    let richardson: Vec<C64> = fine.iter().zip(&coarse).map(|(a, b)| (a - b) / 3.0).collect();
    let quadrature_tolerance = partition.aggregate(&partition.box_norms_from_spectrum(&richardson, two), spec.s, spec.q);

    let k = tail_len(u.len());
    let mut sequence = Vec::with_capacity(k);
    for j in (n + 1 - k)..=n {
        let back = prop.apply(-times[j], &u.fields()[j])?;
        sequence.push(partition.mod_norm(&back.sub(&u0_plus)?, &spec)?);
    }
    let monotone = sequence.windows(2).all(|w| w[1] <= w[0]);
    let scattering_defect = *sequence.last().expect("non-empty tail");
    let estimate = end_tail_estimate(cfg, &partition, u.last())?;
    let norm_plus = partition.mod_norm(&u0_plus, &spec)?;
    let change = partition.mod_norm(&u0_plus.sub(u0_minus)?, &spec)?;
    Ok((
        u0_plus,
        WaveOperatorReport {
            scattering_defect,
            quadrature_tolerance,
            tail: TailReport { estimate, sequence, monotone, end_defect: scattering_defect },
            norm_plus,
            change,
        },
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringResult {
    pub solve: SolveReport,
    pub wave: WaveOperatorReport,
}

/// `u₀⁻ ↦ u₀⁺`.
pub fn scattering_map(cfg: &SolveConfig, u0_minus: &SpectralField) -> Result<(SpectralField, ScatteringResult)> {
    let (u, solve) = scatter_minus(cfg, u0_minus)?;
    let (plus, wave) = wave_operator_plus(cfg, &u, u0_minus)?;
    if !wave.norm_plus.is_finite() {
        return Err(Error::NonFinite("scattering state"));
    }
    Ok((plus, ScatteringResult { solve, wave }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaProbe {
    pub amplitude: f64,
    pub delta: f64,
    pub contraction_factor: Option<f64>,
    pub accepted: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSearch {
    pub probes: Vec<DeltaProbe>,
    /// Largest accepted amplitude, its ball radius and contraction factor.
    pub accepted: Option<DeltaProbe>,
}

/// Largest tested `δ = 2‖A·profile‖_{M^s_{2,q}}` with `θ̂ < threshold`,
/// bisecting the amplitude `A` in `[lo, hi]`; the top is tried first.
pub fn bisect_delta(
    cfg: &SolveConfig,
    profile: &SpectralField,
    lo: f64,
    hi: f64,
    bisections: usize,
    threshold: f64,
    mut on_accept: impl FnMut(&Trajectory, &SolveReport),
) -> Result<DeltaSearch> {
    let partition = cfg.partition()?;
    let mut probes = Vec::new();
    let mut accepted: Option<DeltaProbe> = None;
    let mut test = |amp: f64, probes: &mut Vec<DeltaProbe>| -> Result<bool> {
        let mut c = cfg.clone();
        let u0 = profile.scale(C64::new(amp, 0.0));
        c.delta = 2.0 * partition.mod_norm(&u0, &cfg.norms.data_spec())?;
        let outcome = picard_solve(&c, &u0);
        let probe = match &outcome {
            Ok((traj, report)) => {
                let ok = report.contraction_factor < threshold;
                if ok {
                    on_accept(traj, report);
                }
                DeltaProbe { amplitude: amp, delta: c.delta, contraction_factor: Some(report.contraction_factor), accepted: ok, error: None }
            }
            Err(Error::Hypothesis(msg)) => return Err(Error::Hypothesis(msg.clone())),
            Err(e) => DeltaProbe {
                amplitude: amp,
                delta: c.delta,
                contraction_factor: match e {
                    Error::NonContraction(r) | Error::MaxIterations(r) => Some(r.contraction_factor),
                    _ => None,
                },
                accepted: false,
                error: Some(e.to_string()),
            },
        };
        let ok = probe.accepted;
        probes.push(probe);
        Ok(ok)
    };
    if test(hi, &mut probes)? {
        accepted = probes.last().cloned();
    } else {
        let (mut a, mut b) = (lo, hi);
        if test(a, &mut probes)? {
            accepted = probes.last().cloned();
            for _ in 0..bisections {
                let mid = 0.5 * (a + b);
                if test(mid, &mut probes)? {
                    accepted = probes.last().cloned();
                    a = mid;
                } else {
                    b = mid;
                }
            }
        }
    }
    Ok(DeltaSearch { probes, accepted })
}
