use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A Lebesgue exponent in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(Exponent::Infinity);
        }
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidExponent(format!("{p} is not in [1, inf]")));
        }
        Ok(Exponent::Finite(p))
    }

    /// Exponent from its reciprocal; `0` maps to infinity.
    pub fn from_recip(inv: f64) -> Result<Self> {
        if inv == 0.0 {
            Ok(Exponent::Infinity)
        } else {
            Self::new(1.0 / inv)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    /// `k·p`, used for the `(l+1)`-scaled exponents of the Lipschitz bound.
    pub fn scaled(self, k: f64) -> Exponent {
        match self {
            Exponent::Finite(p) => Exponent::Finite(p * k),
            Exponent::Infinity => Exponent::Infinity,
        }
    }

    /// `Some(p)` when `p` is an even integer.
    pub fn even_integer(self) -> Option<u32> {
        match self {
            Exponent::Finite(p) if p.fract() == 0.0 && p >= 2.0 && (p as u64) % 2 == 0 && p < 1e6 => {
                Some(p as u32)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Infinity" | "∞" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidExponent(format!("cannot parse `{other}`")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `(Σ t^q)^{1/q}`, or the maximum for `q = ∞`.
pub fn lq_aggregate(terms: impl IntoIterator<Item = f64>, q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => terms.into_iter().fold(0.0, f64::max),
        Exponent::Finite(q) if q == 1.0 => terms.into_iter().sum(),
        Exponent::Finite(q) => terms.into_iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_serialize() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("6".parse::<Exponent>().unwrap(), Exponent::Finite(6.0));
        assert!("0.5".parse::<Exponent>().is_err());
        let json = serde_json::to_string(&[Exponent::Finite(2.0), Exponent::Infinity]).unwrap();
        assert_eq!(json, r#"[2.0,"inf"]"#);
        let back: Vec<Exponent> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Exponent::Finite(2.0), Exponent::Infinity]);
    }

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Finite(1.0).conjugate(), Exponent::Infinity);
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
    }

    #[test]
    fn even_integers() {
        assert_eq!(Exponent::Finite(6.0).even_integer(), Some(6));
        assert_eq!(Exponent::Finite(3.0).even_integer(), None);
        assert_eq!(Exponent::Finite(2.5).even_integer(), None);
        assert_eq!(Exponent::Infinity.even_integer(), None);
    }

    #[test]
    fn aggregation() {
        let t = [3.0, 4.0];
        assert_eq!(lq_aggregate(t, Exponent::Finite(1.0)), 7.0);
        assert!((lq_aggregate(t, Exponent::Finite(2.0)) - 5.0).abs() < 1e-15);
        assert_eq!(lq_aggregate(t, Exponent::Infinity), 4.0);
    }
}
