//! Pointwise nonlinearities: products of `m+1` copies of `u` and `ū` with a
//! complex coefficient, and `λ(e^{ρ|u|²} - 1)u`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modspace::{Partition, PlanchonNormSpec};
use crate::spectral::{Exponent, SpectralField, Trajectory};

/// Largest admissible `ρ‖u‖²_∞` for the exponential nonlinearity.
pub const EXP_OVERFLOW_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    Plain,
    Conjugate,
}

/// Sequence of factors, written `u,conj,u`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<Factor>);

impl Pattern {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidNonlinearity("pattern must have at least one factor".into()));
        }
        Ok(Pattern(factors))
    }

    /// `|u|^{2k}u`: `k+1` plain and `k` conjugate factors, alternating.
    pub fn gauge(k: usize) -> Self {
        let mut f = vec![Factor::Plain];
        for _ in 0..k {
            f.push(Factor::Conjugate);
            f.push(Factor::Plain);
        }
        Pattern(f)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    /// Number of factors minus one.
    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn plain_count(&self) -> usize {
        self.0.iter().filter(|f| **f == Factor::Plain).count()
    }

    pub fn conjugate_count(&self) -> usize {
        self.0.len() - self.plain_count()
    }

    /// `Some(k)` if the product equals `|u|^{2k}u`.
    pub fn gauge_order(&self) -> Option<usize> {
        let c = self.conjugate_count();
        (self.plain_count() == c + 1).then_some(c)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let zc = z.conj();
        self.0.iter().fold(C64::new(1.0, 0.0), |acc, f| match f {
            Factor::Plain => acc * z,
            Factor::Conjugate => acc * zc,
        })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .0
            .iter()
            .map(|x| match x {
                Factor::Plain => "u",
                Factor::Conjugate => "conj",
            })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .split(',')
            .map(|t| match t.trim() {
                "u" | "plain" => Ok(Factor::Plain),
                "conj" | "ubar" | "conjugate" => Ok(Factor::Conjugate),
                other => Err(Error::InvalidNonlinearity(format!("unknown factor `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Pattern::new(factors)
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinSpec {
    Power { pattern: Pattern, coeff: C64 },
    Exponential { lambda: C64, rho: f64, cutoff: u32 },
}

impl NonlinSpec {
    pub fn power(pattern: &str, coeff: C64) -> Result<Self> {
        Ok(NonlinSpec::Power { pattern: pattern.parse()?, coeff })
    }

    /// `c|u|^{2k}u`.
    pub fn gauge_power(k: usize, coeff: f64) -> Self {
        NonlinSpec::Power { pattern: Pattern::gauge(k), coeff: C64::new(coeff, 0.0) }
    }

    /// `f = 0`, expressed as a cubic with zero coefficient.
    pub fn zero() -> Self {
        Self::gauge_power(1, 0.0)
    }

    pub fn exponential(lambda: C64, rho: f64, cutoff: u32) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!("rho = {rho} must be positive")));
        }
        if cutoff < 1 {
            return Err(Error::InvalidNonlinearity("series cutoff must be at least 1".into()));
        }
        Ok(NonlinSpec::Exponential { lambda, rho, cutoff })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NonlinSpec::Power { coeff, .. } => *coeff == C64::new(0.0, 0.0),
            NonlinSpec::Exponential { lambda, .. } => *lambda == C64::new(0.0, 0.0),
        }
    }

    /// `m` for the power kind.
    pub fn degree(&self) -> Option<usize> {
        match self {
            NonlinSpec::Power { pattern, .. } => Some(pattern.degree()),
            NonlinSpec::Exponential { .. } => None,
        }
    }

    /// Lowest power appearing in `f`, i.e. `m` for the power kind and `2`
    /// for the exponential.
    pub fn leading_degree(&self) -> usize {
        self.degree().unwrap_or(2)
    }

    /// If `f(u) = g(|u|²)·u` with real `g`, returns `g`; then `∂_t u = i f(u)`
    /// is a pure phase rotation.
    pub fn real_gauge_rate(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match self {
            NonlinSpec::Power { pattern, coeff } if coeff.im == 0.0 => {
                let k = pattern.gauge_order()? as i32;
                let c = coeff.re;
                Some(Box::new(move |a2: f64| c * a2.powi(k)))
            }
            NonlinSpec::Exponential { lambda, rho, .. } if lambda.im == 0.0 => {
                let (l, r) = (lambda.re, *rho);
                Some(Box::new(move |a2: f64| l * (r * a2).exp_m1()))
            }
            _ => None,
        }
    }

    /// Pointwise value; the exponential kind uses the closed form.
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            NonlinSpec::Power { pattern, coeff } => coeff * pattern.eval(z),
            NonlinSpec::Exponential { lambda, rho, .. } => lambda * (rho * z.norm_sqr()).exp_m1() * z,
        }
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        match self {
            NonlinSpec::Power { .. } => apply_power(self, u),
            NonlinSpec::Exponential { .. } => apply_exponential(self, u),
        }
    }

    /// In-place pointwise evaluation on raw samples.
    pub(crate) fn eval_slice(&self, values: &mut [C64]) -> Result<()> {
        if let NonlinSpec::Exponential { rho, .. } = self {
            check_overflow(*rho, values)?;
        }
        for z in values.iter_mut() {
            *z = self.eval(*z);
        }
        Ok(())
    }
}

fn check_overflow(rho: f64, values: &[C64]) -> Result<()> {
    let sup2 = values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if !sup2.is_finite() {
        return Err(Error::NonFinite("exponential nonlinearity"));
    }
    if rho * sup2 > EXP_OVERFLOW_LIMIT {
        return Err(Error::Overflow(rho * sup2));
    }
    Ok(())
}

impl Serialize for NonlinSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(None)?;
        match self {
            NonlinSpec::Power { pattern, coeff } => {
                map.serialize_entry("kind", "power")?;
                map.serialize_entry("pattern", &pattern.to_string())?;
                map.serialize_entry("coeff", &[coeff.re, coeff.im])?;
            }
            NonlinSpec::Exponential { lambda, rho, cutoff } => {
                map.serialize_entry("kind", "exponential")?;
                map.serialize_entry("lambda", &[lambda.re, lambda.im])?;
                map.serialize_entry("rho", rho)?;
                map.serialize_entry("cutoff", cutoff)?;
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for NonlinSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
        enum Raw {
            Power { pattern: String, coeff: [f64; 2] },
            Exponential { lambda: [f64; 2], rho: f64, cutoff: u32 },
        }
        match Raw::deserialize(d)? {
            Raw::Power { pattern, coeff } => NonlinSpec::power(&pattern, C64::new(coeff[0], coeff[1])),
            Raw::Exponential { lambda, rho, cutoff } => {
                NonlinSpec::exponential(C64::new(lambda[0], lambda[1]), rho, cutoff)
            }
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `c·π^{m+1}(u)` pointwise.
pub fn apply_power(spec: &NonlinSpec, u: &SpectralField) -> Result<SpectralField> {
    match spec {
        NonlinSpec::Power { .. } => Ok(u.map(|z| spec.eval(z))),
        _ => Err(Error::KindMismatch("power")),
    }
}

/// `λ(e^{ρ|u|²} - 1)u` pointwise, closed form.
pub fn apply_exponential(spec: &NonlinSpec, u: &SpectralField) -> Result<SpectralField> {
    match spec {
        NonlinSpec::Exponential { rho, .. } => {
            check_overflow(*rho, u.values())?;
            Ok(u.map(|z| spec.eval(z)))
        }
        _ => Err(Error::KindMismatch("exponential")),
    }
}

/// `λ Σ_{k=1}^{M} ρ^k/k! |u|^{2k} u` pointwise.
pub fn exponential_series(spec: &NonlinSpec, u: &SpectralField, cutoff: u32) -> Result<SpectralField> {
    match spec {
        NonlinSpec::Exponential { lambda, rho, .. } => {
            check_overflow(*rho, u.values())?;
            Ok(u.map(|z| {
                let x = rho * z.norm_sqr();
                let mut term = 1.0;
                let mut sum = 0.0;
                for k in 1..=cutoff {
                    term *= x / k as f64;
                    sum += term;
                }
                lambda * sum * z
            }))
        }
        _ => Err(Error::KindMismatch("exponential")),
    }
}

/// Bound on `|closed form - series|` at a point with `|u| ≤ sup`:
/// the Lagrange remainder `e^x x^{M+1}/(M+1)!·|λ|·sup` with `x = ρ·sup²`,
/// plus a rounding allowance for the two evaluations.
pub fn exponential_tail_bound(lambda: C64, rho: f64, cutoff: u32, sup: f64) -> f64 {
    let x = rho * sup * sup;
    let mut lagrange = x.exp();
    for k in 1..=(cutoff + 1) {
        lagrange *= x / k as f64;
    }
    let value = lambda.norm() * x.exp_m1() * sup;
    lambda.norm() * sup * lagrange + 8.0 * f64::EPSILON * value
}

/// Relative aliasing of `f(u)`: compare `f` evaluated on a twice finer grid
/// with the band-limited interpolation of `f` evaluated on the native grid.
pub fn aliasing_residual(spec: &NonlinSpec, u: &SpectralField) -> Result<f64> {
    let coarse = spec.apply(u)?.upsample(2)?;
    let fine = spec.apply(&u.upsample(2)?)?;
    let two = Exponent::Finite(2.0);
    let reference = fine.lp_norm(two)?;
    if reference == 0.0 {
        return Ok(0.0);
    }
    Ok(fine.sub(&coarse)?.lp_norm(two)? / reference)
}

/// Exponents for the difference estimate of `π^{m+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzExponents {
    pub s: f64,
    pub q: Exponent,
    pub r_tilde: Exponent,
    pub p_tilde: Exponent,
    pub l: usize,
    pub m: usize,
}

/// Both sides of
/// `‖π(u) - π(v)‖_{(r̃,p̃)} ≲ ‖u - v‖_{((l+1)r̃,(l+1)p̃)}·(‖u‖^l_{((l+1)r̃,(l+1)p̃)}‖u‖^{m-l}_{(∞,2)} + same for v)`.
pub fn power_lipschitz_witness(
    partition: &Partition,
    pattern: &Pattern,
    u: &Trajectory,
    v: &Trajectory,
    e: &LipschitzExponents,
) -> Result<(f64, f64)> {
    if pattern.degree() != e.m || e.l > e.m {
        return Err(Error::InvalidNonlinearity(format!(
            "pattern of degree {} does not match m = {}, l = {}",
            pattern.degree(),
            e.m,
            e.l
        )));
    }
    let pi = |w: &Trajectory| w.map(|_, f| f.map(|z| pattern.eval(z)));
    // π(0) = 0, so a zero v leaves every term of u unchanged
    let v_zero = v.fields().iter().all(|f| f.values().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    let diff_nl = if v_zero { pi(u)? } else { pi(u)?.sub(&pi(v)?)? };
    let lhs = partition.planchon_norm(&diff_nl, &PlanchonNormSpec::new(e.s, e.q, e.r_tilde, e.p_tilde))?;

    let k = (e.l + 1) as f64;
    let lifted = PlanchonNormSpec::new(e.s, e.q, e.r_tilde.scaled(k), e.p_tilde.scaled(k));
    let energy = PlanchonNormSpec::new(e.s, e.q, Exponent::Infinity, Exponent::Finite(2.0));
    let factor = |w: &Trajectory, a: f64| -> Result<f64> {
        let b = partition.planchon_norm(w, &energy)?;
        Ok(a.powi(e.l as i32) * b.powi((e.m - e.l) as i32))
    };
    let lifted_u = partition.planchon_norm(u, &lifted)?;
    let rhs = if v_zero {
        lifted_u * factor(u, lifted_u)?
    } else {
        let lifted_v = partition.planchon_norm(v, &lifted)?;
        partition.planchon_norm(&u.sub(v)?, &lifted)? * (factor(u, lifted_u)? + factor(v, lifted_v)?)
    };
    Ok((lhs, rhs))
}

/// Largest `|a^{m+1} - b^{m+1}| / (|a - b|(|a|^m + |b|^m))` over a square
/// complex mesh `{x + iy : x, y ∈ [-1, 1]}` with `points` nodes per side.
pub fn scalar_lipschitz_ratio(m: u32, points: usize) -> f64 {
    let nodes: Vec<C64> = (0..points)
        .flat_map(|i| {
            (0..points).map(move |j| {
                let s = |k: usize| -1.0 + 2.0 * k as f64 / (points - 1) as f64;
                C64::new(s(i), s(j))
            })
        })
        .collect();
    let mut worst: f64 = 0.0;
    for &a in &nodes {
        for &b in &nodes {
            let den = (a - b).norm() * (a.norm().powi(m as i32) + b.norm().powi(m as i32));
            if den > 1e-12 {
                let num = (a.powu(m + 1) - b.powu(m + 1)).norm();
                worst = worst.max(num / den);
            }
        }
    }
    worst
}
