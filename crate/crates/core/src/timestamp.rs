use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A dataset-native time value.
///
/// Integral columns (day counts, epoch seconds) stay exact as `i64`; anything
/// else is an `f64`. Ordering and equality are numeric across both variants.
#[derive(Debug, Clone, Copy)]
pub enum Timestamp {
    Int(i64),
    Dec(f64),
}

impl Timestamp {
    pub fn as_f64(self) -> f64 {
        match self {
            Timestamp::Int(v) => v as f64,
            Timestamp::Dec(v) => v,
        }
    }

    pub fn is_integral(self) -> bool {
        matches!(self, Timestamp::Int(_))
    }

    /// Parse one cell. Integers win over decimals; non-finite values are rejected.
    pub fn parse(raw: &str) -> Option<Self> {
        let s = raw.trim();
        if let Ok(v) = s.parse::<i64>() {
            return Some(Timestamp::Int(v));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(Timestamp::Dec(v)),
            _ => None,
        }
    }

    pub fn to_decimal(self) -> Self {
        Timestamp::Dec(self.as_f64())
    }

    /// `self + delta`, keeping the integral representation (rounded) when
    /// `self` is integral.
    pub fn offset(self, delta: f64) -> Self {
        match self {
            Timestamp::Int(v) => Timestamp::Int(v.saturating_add(delta.round() as i64)),
            Timestamp::Dec(v) => Timestamp::Dec(v + delta),
        }
    }

    /// Re-express `value` in the representation of `like`.
    pub fn like(like: Timestamp, value: f64) -> Self {
        match like {
            Timestamp::Int(_) => Timestamp::Int(value.round() as i64),
            Timestamp::Dec(_) => Timestamp::Dec(value),
        }
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Timestamp::Int(a), Timestamp::Int(b)) => a.cmp(b),
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Timestamp {}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Int(v) => write!(f, "{v}"),
            Timestamp::Dec(v) => write!(f, "{v:?}"),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Timestamp::Int(v) => s.serialize_i64(*v),
            Timestamp::Dec(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::I(v) => Ok(Timestamp::Int(v)),
            Raw::F(v) => Ok(Timestamp::Dec(v)),
            Raw::S(s) => {
                Timestamp::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("timestamp `{s}` is not a number")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_prefers_integers() {
        assert_eq!(Timestamp::parse("42"), Some(Timestamp::Int(42)));
        assert!(Timestamp::parse(" 42 ").unwrap().is_integral());
        assert!(!Timestamp::parse("42.5").unwrap().is_integral());
        assert_eq!(Timestamp::parse("nan"), None);
        assert_eq!(Timestamp::parse("2021-01-01"), None);
    }

    #[test]
    fn mixed_comparison_is_numeric() {
        assert_eq!(Timestamp::Int(3), Timestamp::Dec(3.0));
        assert!(Timestamp::Int(3) < Timestamp::Dec(3.5));
        assert!(Timestamp::Dec(-1.0) < Timestamp::Int(0));
    }

    #[test]
    fn display_round_trips() {
        for t in [Timestamp::Int(-7), Timestamp::Dec(1.5), Timestamp::Dec(1e-7), Timestamp::Dec(3.0)] {
            let back = Timestamp::parse(&t.to_string()).unwrap();
            assert_eq!(back, t);
        }
        // a decimal that happens to be integral keeps its decimal point
        assert_eq!(Timestamp::Dec(3.0).to_string(), "3.0");
    }

    #[test]
    fn offset_keeps_representation() {
        assert_eq!(Timestamp::Int(10).offset(2.6), Timestamp::Int(13));
        assert!(Timestamp::Int(10).offset(2.6).is_integral());
        assert_eq!(Timestamp::Dec(1.0).offset(0.25), Timestamp::Dec(1.25));
    }
}
