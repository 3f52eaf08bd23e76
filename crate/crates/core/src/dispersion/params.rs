//! Exponent algebra of the well-posedness theory, in exact rationals.
//!
//! Exponents are stored through their reciprocals so that `∞` is just `0`.
//! With `D = d - 1/c_γ` the relevant quantities are
//!
//! * `m₀ = ⌈4/D⌉`,
//! * `I_{m,d} = [1/(2(m+1)), 1/(m₀+1)]` for `1/r`,
//! * `l = min{⌊r⌋ - 1, m}`,
//! * `J_{r,d} = [1/2 - 2/(rD) - (l - 4/D)/(2(l+1)), 1/2 - 2/(rD)]` for `1/p`,
//! * `1/p_a = 1/2 - 2/(rD)`,
//! * `r̃ = r/(l+1)`, `1/p̃ = 1/2 + 2(1 - 1/r̃)/D`.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::Exponent;

fn ratio(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn int(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn half() -> Rational64 {
    ratio(1, 2)
}

/// A Lebesgue exponent held by its exact reciprocal (`∞ ↔ 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecipExponent(pub Rational64);

impl RecipExponent {
    pub const INFINITY: RecipExponent = RecipExponent(Rational64::new_raw(0, 1));

    pub fn from_value(p: Rational64) -> Result<Self> {
        if p <= Rational64::zero() {
            return Err(Error::InvalidExponent(format!("{p} is not positive")));
        }
        Ok(RecipExponent(p.recip()))
    }

    pub fn integer(p: i64) -> Self {
        RecipExponent(ratio(1, p))
    }

    pub fn recip(self) -> Rational64 {
        self.0
    }

    pub fn value(self) -> Option<Rational64> {
        (!self.0.is_zero()).then(|| self.0.recip())
    }

    /// Conjugate exponent `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Self {
        RecipExponent(Rational64::one() - self.0)
    }

    /// Whether the exponent lies in `[lo, ∞]`, with `lo` given as a value.
    pub fn at_least(self, lo: i64) -> bool {
        self.0 >= Rational64::zero() && self.0 <= ratio(1, lo)
    }

    pub fn to_exponent(self) -> Result<Exponent> {
        let r = self.0;
        Exponent::from_recip(*r.numer() as f64 / *r.denom() as f64)
    }
}

impl fmt::Display for RecipExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            None => write!(f, "inf"),
            Some(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for RecipExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(RecipExponent::INFINITY);
        }
        let v: Rational64 = s.parse().map_err(|_| Error::InvalidExponent(format!("cannot parse `{s}`")))?;
        RecipExponent::from_value(v)
    }
}

impl Serialize for RecipExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RecipExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(p) => RecipExponent::from_value(int(p)),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

mod rational_str {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Closed rational interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "rational_str")]
    pub lo: Rational64,
    #[serde(with = "rational_str")]
    pub hi: Rational64,
}

impl Interval {
    pub fn new(lo: Rational64, hi: Rational64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: Rational64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> Rational64 {
        self.hi - self.lo
    }
}

/// `2` if the quartic term is present, `3` otherwise.
pub fn c_gamma(gamma_nonzero: bool) -> i64 {
    if gamma_nonzero {
        2
    } else {
        3
    }
}

/// `D = d - 1/c_γ`.
pub fn effective_dim(d: i64, c_gamma: i64) -> Rational64 {
    int(d) - ratio(1, c_gamma)
}

fn ceil(r: Rational64) -> i64 {
    r.ceil().to_integer()
}

fn floor(r: Rational64) -> i64 {
    r.floor().to_integer()
}

/// `m₀ = ⌈4/(d - 1/c_γ)⌉`.
pub fn compute_m0(d: i64, gamma_nonzero: bool) -> Result<i64> {
    if d < 2 {
        return Err(Error::Hypothesis(format!("dimension d = {d} must be at least 2")));
    }
    Ok(ceil(int(4) / effective_dim(d, c_gamma(gamma_nonzero))))
}

/// `I_{m,d} = [1/(2(m+1)), 1/(m₀+1)]` (range of `1/r`).
pub fn interval_i(m: i64, d: i64, gamma_nonzero: bool) -> Result<Interval> {
    let m0 = compute_m0(d, gamma_nonzero)?;
    if m < m0 {
        return Err(Error::Hypothesis(format!("m = {m} violates m >= m0 = {m0}")));
    }
    Ok(Interval::new(ratio(1, 2 * (m + 1)), ratio(1, m0 + 1)))
}

/// `l = min{⌊r⌋ - 1, m}`, checked against the largest `k ∈ {m₀, …, m}` with
/// `1/r ∈ [1/(2(k+1)), 1/(k+1)]`.
pub fn effective_l(inv_r: Rational64, m: i64, m0: i64) -> Result<i64> {
    let range = Interval::new(ratio(1, 2 * (m + 1)), ratio(1, m0 + 1));
    if m < m0 || !range.contains(inv_r) {
        return Err(Error::Hypothesis(format!("1/r = {inv_r} is outside I = [{}, {}]", range.lo, range.hi)));
    }
    let r = inv_r.recip();
    let by_floor = (floor(r) - 1).min(m);
    let by_max = (m0..=m)
        .filter(|&k| Interval::new(ratio(1, 2 * (k + 1)), ratio(1, k + 1)).contains(inv_r))
        .max();
    match by_max {
        Some(k) if k == by_floor => Ok(k),
        other => Err(Error::Hypothesis(format!(
            "effective nonlinearity mismatch: min-formula {by_floor}, max-formula {other:?}"
        ))),
    }
}

/// `1/p_a = 1/2 - 2/(rD)`.
pub fn p_a_recip(inv_r: Rational64, d: i64, c_gamma: i64) -> Rational64 {
    half() - int(2) * inv_r / effective_dim(d, c_gamma)
}

/// `J_{r,d}` (range of `1/p`).
pub fn interval_j(inv_r: Rational64, d: i64, gamma_nonzero: bool, l: i64) -> Result<Interval> {
    let dd = effective_dim(d, c_gamma(gamma_nonzero));
    let hi = p_a_recip(inv_r, d, c_gamma(gamma_nonzero));
    let lo = hi - ratio(1, 2 * (l + 1)) * (int(l) - int(4) / dd);
    let j = Interval::new(lo, hi);
    if j.is_empty() {
        return Err(Error::Hypothesis(format!("J is empty: [{lo}, {hi}]")));
    }
    Ok(j)
}

/// `2/r + D/p - D/2`; zero iff `(p, r)` is admissible.
pub fn admissible_defect(d: i64, c_gamma: i64, inv_p: Rational64, inv_r: Rational64) -> Rational64 {
    let dd = effective_dim(d, c_gamma);
    int(2) * inv_r + dd * inv_p - dd * half()
}

/// Same left-minus-right expression; `≤ 0` qualifies `(σ, ρ)`.
pub fn subadmissible_defect(d: i64, c_gamma: i64, inv_sigma: Rational64, inv_rho: Rational64) -> Rational64 {
    admissible_defect(d, c_gamma, inv_sigma, inv_rho)
}

/// Whether a reciprocal lies in `[0, 1/2]`, i.e. the exponent is in `[2, ∞]`.
pub fn in_two_to_inf(inv: Rational64) -> bool {
    inv >= Rational64::zero() && inv <= half()
}

/// The pair `(p̃, r̃)` with `(p̃', r̃')` admissible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DualPair {
    pub p_tilde: RecipExponent,
    pub r_tilde: RecipExponent,
    #[serde(with = "rational_str")]
    pub conjugate_defect: Rational64,
    /// `(p̃', r̃') ∈ [2, ∞]²`.
    pub conjugates_in_range: bool,
}

impl DualPair {
    pub fn p_conjugate(&self) -> RecipExponent {
        self.p_tilde.conjugate()
    }

    pub fn r_conjugate(&self) -> RecipExponent {
        self.r_tilde.conjugate()
    }
}

pub fn dual_pair(inv_r: Rational64, l: i64, d: i64, gamma_nonzero: bool) -> Result<DualPair> {
    let cg = c_gamma(gamma_nonzero);
    let dd = effective_dim(d, cg);
    let inv_r_tilde = int(l + 1) * inv_r;
    if inv_r_tilde < half() || inv_r_tilde > Rational64::one() {
        return Err(Error::Hypothesis(format!("r~ = {} is outside [1, 2]", inv_r_tilde.recip())));
    }
    let inv_p_tilde = half() + int(2) * (Rational64::one() - inv_r_tilde) / dd;
    let p_conj = Rational64::one() - inv_p_tilde;
    let r_conj = Rational64::one() - inv_r_tilde;
    Ok(DualPair {
        p_tilde: RecipExponent(inv_p_tilde),
        r_tilde: RecipExponent(inv_r_tilde),
        conjugate_defect: admissible_defect(d, cg, p_conj, r_conj),
        conjugates_in_range: in_two_to_inf(p_conj) && in_two_to_inf(r_conj),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimeExponentLedger {
    pub r: RecipExponent,
    pub l: i64,
    #[serde(rename = "J")]
    pub j: Interval,
    pub p_a: RecipExponent,
    pub p_tilde: RecipExponent,
    pub r_tilde: RecipExponent,
    pub dual: DualPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<RecipExponent>,
}

/// Everything Theorem-level about `(d, m, γ)` and optionally `(r, p)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParamLedger {
    pub d: i64,
    pub m: i64,
    pub c_gamma: i64,
    pub m0: i64,
    #[serde(rename = "I")]
    pub i: Interval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeExponentLedger>,
    pub checks: Vec<Check>,
}

impl ParamLedger {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn param_ledger(
    d: i64,
    m: i64,
    gamma_nonzero: bool,
    r: Option<RecipExponent>,
    p: Option<RecipExponent>,
) -> Result<ParamLedger> {
    let cg = c_gamma(gamma_nonzero);
    let m0 = compute_m0(d, gamma_nonzero)?;
    let i = interval_i(m, d, gamma_nonzero)?;
    let mut checks = vec![
        Check { name: "I within [0, 1/2]".into(), pass: i.lo >= Rational64::zero() && i.hi <= half() },
        Check { name: "I nonempty".into(), pass: !i.is_empty() },
    ];
    let time = match r {
        None => None,
        Some(r) => {
            let inv_r = r.recip();
            if !i.contains(inv_r) {
                return Err(Error::Hypothesis(format!("1/r = {inv_r} is outside I = [{}, {}]", i.lo, i.hi)));
            }
            let l = effective_l(inv_r, m, m0)?;
            let j = interval_j(inv_r, d, gamma_nonzero, l)?;
            let inv_pa = p_a_recip(inv_r, d, cg);
            let dual = dual_pair(inv_r, l, d, gamma_nonzero)?;
            checks.push(Check {
                name: "(p_a, r) admissible".into(),
                pass: admissible_defect(d, cg, inv_pa, inv_r).is_zero() && in_two_to_inf(inv_pa),
            });
            checks.push(Check { name: "(p~', r~') defect zero".into(), pass: dual.conjugate_defect.is_zero() });
            checks.push(Check { name: "(p~', r~') in [2, inf]".into(), pass: dual.conjugates_in_range });
            checks.push(Check {
                name: "J lower end equals 1/((l+1) p~)".into(),
                pass: j.lo == dual.p_tilde.recip() / int(l + 1),
            });
            if let Some(p) = p {
                let inv_p = p.recip();
                if !j.contains(inv_p) {
                    return Err(Error::Hypothesis(format!("1/p = {inv_p} is outside J = [{}, {}]", j.lo, j.hi)));
                }
                checks.push(Check { name: "p >= p_a".into(), pass: inv_p <= inv_pa });
                checks.push(Check {
                    name: "(l+1) p~ >= p".into(),
                    pass: dual.p_tilde.recip() <= int(l + 1) * inv_p,
                });
            }
            Some(TimeExponentLedger {
                r,
                l,
                j,
                p_a: RecipExponent(inv_pa),
                p_tilde: dual.p_tilde,
                r_tilde: dual.r_tilde,
                dual,
                p,
            })
        }
    };
    Ok(ParamLedger { d, m, c_gamma: cg, m0, i, time, checks })
}

/// Sweep of the exponent ranges on the rational mesh `{k/N}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MeshReport {
    pub points: usize,
    /// Failures of the identities that must hold at every mesh point.
    pub violations: Vec<String>,
    /// Points where `(p̃', r̃')` has zero defect but leaves `[2, ∞]²`.
    pub dual_out_of_range: usize,
}

/// Check every mesh point `1/r ∈ I ∩ (1/N)ℤ`, `1/p ∈ J ∩ (1/N)ℤ` (endpoints
/// always included).
pub fn mesh_check(d: i64, m: i64, gamma_nonzero: bool, denominator: i64) -> Result<MeshReport> {
    let cg = c_gamma(gamma_nonzero);
    let m0 = compute_m0(d, gamma_nonzero)?;
    let i = interval_i(m, d, gamma_nonzero)?;
    let mut report = MeshReport::default();
    for inv_r in mesh(&i, denominator) {
        let l = effective_l(inv_r, m, m0)?;
        let j = interval_j(inv_r, d, gamma_nonzero, l)?;
        let inv_pa = p_a_recip(inv_r, d, cg);
        let dual = dual_pair(inv_r, l, d, gamma_nonzero)?;
        if !admissible_defect(d, cg, inv_pa, inv_r).is_zero() || !in_two_to_inf(inv_pa) {
            report.violations.push(format!("(p_a, r) not admissible at 1/r = {inv_r}"));
        }
        if !dual.conjugate_defect.is_zero() {
            report.violations.push(format!("dual defect {} at 1/r = {inv_r}", dual.conjugate_defect));
        }
        if !dual.conjugates_in_range {
            report.dual_out_of_range += 1;
        }
        for inv_p in mesh(&j, denominator) {
            report.points += 1;
            if inv_p > inv_pa {
                report.violations.push(format!("p < p_a at 1/r = {inv_r}, 1/p = {inv_p}"));
            }
            if dual.p_tilde.recip() > int(l + 1) * inv_p {
                report.violations.push(format!("(l+1) p~ < p at 1/r = {inv_r}, 1/p = {inv_p}"));
            }
        }
    }
    Ok(report)
}

fn mesh(iv: &Interval, denominator: i64) -> Vec<Rational64> {
    let mut out = vec![iv.lo];
    let start = (iv.lo * int(denominator)).floor().to_integer() + 1;
    let mut k = start;
    loop {
        let x = ratio(k, denominator);
        if x >= iv.hi {
            break;
        }
        out.push(x);
        k += 1;
    }
    if iv.hi != iv.lo {
        out.push(iv.hi);
    }
    out
}

/// Largest `r̃` for which `(p̃', r̃')` stays in `[2, ∞]²`: `1/(1 - D/4)`, or
/// `None` when every `r̃ ∈ [1, 2]` works.
pub fn dual_range_limit(d: i64, gamma_nonzero: bool) -> Option<Rational64> {
    let dd = effective_dim(d, c_gamma(gamma_nonzero));
    let bound = Rational64::one() - dd / int(4);
    if bound.is_positive() && bound.recip() < int(2) {
        Some(bound.recip())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m0_values() {
        assert_eq!(compute_m0(2, true).unwrap(), 3);
        assert_eq!(compute_m0(2, false).unwrap(), 3);
        assert_eq!(compute_m0(3, false).unwrap(), 2);
        assert_eq!(compute_m0(3, true).unwrap(), 2);
        assert!(compute_m0(1, true).is_err());
    }

    #[test]
    fn interval_values() {
        assert_eq!(interval_i(3, 2, true).unwrap(), Interval::new(ratio(1, 8), ratio(1, 4)));
        assert_eq!(interval_i(5, 2, true).unwrap(), Interval::new(ratio(1, 12), ratio(1, 4)));
        assert!(interval_i(2, 2, true).unwrap_err().is_hypothesis());
        let j = interval_j(ratio(1, 4), 2, true, 3).unwrap();
        assert_eq!(j, Interval::new(ratio(1, 8), ratio(1, 6)));
        assert_eq!(p_a_recip(ratio(1, 4), 2, 2), ratio(1, 6));
    }

    #[test]
    fn effective_nonlinearity() {
        assert_eq!(effective_l(ratio(1, 4), 5, 3).unwrap(), 3);
        assert_eq!(effective_l(ratio(1, 4), 3, 3).unwrap(), 3);
        for m in 3..8 {
            assert_eq!(effective_l(ratio(1, m + 1), m, 3).unwrap(), m);
        }
        assert!(effective_l(ratio(1, 3), 3, 3).is_err());
    }

    #[test]
    fn dual_pairs() {
        let a = dual_pair(ratio(1, 4), 3, 2, true).unwrap();
        assert_eq!(a.r_tilde.value(), Some(int(1)));
        assert_eq!(a.p_tilde.value(), Some(int(2)));
        let b = dual_pair(ratio(1, 8), 3, 2, true).unwrap();
        assert_eq!(b.r_tilde.value(), Some(int(2)));
        assert_eq!(b.p_tilde.value(), Some(ratio(6, 7)));
        assert!(b.conjugate_defect.is_zero());
        assert!(!b.conjugates_in_range);
        assert_eq!(dual_range_limit(2, true), Some(ratio(8, 5)));
        assert_eq!(dual_range_limit(3, true), None);
    }

    #[test]
    fn defects() {
        assert!(admissible_defect(2, 2, half(), Rational64::zero()).is_zero());
        assert!(admissible_defect(2, 2, ratio(1, 6), ratio(1, 4)).is_zero());
        assert_eq!(admissible_defect(2, 2, half(), half()), int(1));
        assert_eq!(subadmissible_defect(2, 2, ratio(1, 8), ratio(1, 4)), ratio(-1, 16));
        assert!(subadmissible_defect(2, 2, half(), half()).is_positive());
    }

    #[test]
    fn recip_exponent_text() {
        let p: RecipExponent = "6/7".parse().unwrap();
        assert_eq!(p.recip(), ratio(7, 6));
        assert_eq!(p.to_string(), "6/7");
        assert_eq!("inf".parse::<RecipExponent>().unwrap(), RecipExponent::INFINITY);
        let json = serde_json::to_string(&Interval::new(ratio(1, 8), ratio(1, 4))).unwrap();
        assert_eq!(json, r#"{"lo":"1/8","hi":"1/4"}"#);
        let back: RecipExponent = serde_json::from_str("4").unwrap();
        assert_eq!(back, RecipExponent::integer(4));
    }

    #[test]
    fn ledger_example() {
        let ledger = param_ledger(2, 3, true, Some(RecipExponent::integer(4)), Some(RecipExponent::integer(6))).unwrap();
        assert_eq!(ledger.m0, 3);
        assert!(ledger.all_pass(), "{:?}", ledger.checks);
        let t = ledger.time.unwrap();
        assert_eq!(t.l, 3);
        assert_eq!(t.p_a, RecipExponent::integer(6));
    }
}
