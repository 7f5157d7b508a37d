//! Energies carried as the exact decimal text they were read from, paired
//! with the parsed binary value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("not a decimal number: {0:?}")]
pub struct DecimalError(pub String);

/// A decimal quantity whose source text is preserved verbatim.
#[derive(Clone, PartialEq)]
pub struct Decimal {
    text: String,
    value: f64,
}

impl Decimal {
    pub fn from_f64(value: f64) -> Self {
        Self {
            text: format!("{value}"),
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl FromStr for Decimal {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits_ok = !t.is_empty()
            && t.chars()
                .all(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'));
        let value: f64 = t.parse().map_err(|_| DecimalError(s.to_string()))?;
        if !digits_ok || !value.is_finite() {
            return Err(DecimalError(s.to_string()));
        }
        Ok(Self {
            text: t.to_string(),
            value,
        })
    }
}

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) => Ok(Decimal::from_f64(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_source_digits() {
        let d: Decimal = "-1543.61225634143420".parse().unwrap();
        assert_eq!(d.as_str(), "-1543.61225634143420");
        assert_eq!(d.value(), -1543.6122563414342);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, "\"-1543.61225634143420\"");
        let back: Decimal = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_garbage() {
        assert!("abc".parse::<Decimal>().is_err());
        assert!("".parse::<Decimal>().is_err());
        assert!("inf".parse::<Decimal>().is_err());
        assert!("NaN".parse::<Decimal>().is_err());
    }
}
