//! Exact rational FDP tolerance.
//!
//! The FDP constants depend on `floor(gamma * i)`. Evaluating that in binary
//! floating point misfloors values such as `0.29 * 100`, so the tolerance is
//! kept as an exact fraction and every floor is taken in integer arithmetic.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{param, Error, Result};

/// Largest number of fractional digits accepted in a decimal tolerance.
const MAX_DECIMAL_DIGITS: u32 = 18;

/// FDP tolerance `gamma`, an exact rational strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gamma(Ratio<u64>);

impl Gamma {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(param("gamma denominator must be nonzero"));
        }
        let r = Ratio::new(numer, denom);
        if *r.numer() == 0 || r.numer() >= r.denom() {
            return Err(param(format!("gamma must lie in (0, 1), got {numer}/{denom}")));
        }
        Ok(Self(r))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    /// `floor(gamma * n)`, exact.
    pub fn floor_mul(&self, n: usize) -> usize {
        let prod = u128::from(self.numer()) * n as u128;
        (prod / u128::from(self.denom())) as usize
    }

    /// Whether `m * gamma < x` for a nonnegative integer `x`, exact.
    pub fn mul_lt(&self, m: usize, x: usize) -> bool {
        u128::from(self.numer()) * (m as u128) < u128::from(self.denom()) * (x as u128)
    }

    /// Whether a proportion `num / den` strictly exceeds gamma, exact.
    pub fn exceeded_by(&self, num: usize, den: usize) -> bool {
        den > 0 && u128::from(self.denom()) * (num as u128) > u128::from(self.numer()) * (den as u128)
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Gamma {
    type Err = Error;

    /// Accepts a fraction (`1/10`) or a plain decimal (`0.1`, `.05`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || param(format!("cannot parse gamma `{s}` as a decimal or fraction"));
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Gamma::new(n, d);
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !all_digits(int_part) || !all_digits(frac_part) {
            return Err(bad());
        }
        let frac_part = frac_part.trim_end_matches('0');
        let digits = frac_part.len() as u32;
        if digits > MAX_DECIMAL_DIGITS {
            return Err(param(format!("gamma `{s}` has more than {MAX_DECIMAL_DIGITS} decimal digits")));
        }
        let int_val: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let denom = 10u64.pow(digits);
        let numer = int_val
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Gamma::new(numer, denom)
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
