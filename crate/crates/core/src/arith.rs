//! Exact rational helpers shared by every other module.
//!
//! Interval endpoints, convergents and approximating-function thresholds are
//! all handled exactly. The only place floating point enters is as a first
//! guess for integer roots, which are then corrected with exact comparisons.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary-precision exact fraction, always kept in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{input}` as a rational number")]
pub struct ParseRationalError {
    pub input: String,
}

/// `p/q` as a [`Rational`].
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn from_biguint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

/// Parses `p/q`, a plain integer, or a decimal such as `-0.25` or `1.5e-3`.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        input: input.to_string(),
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{whole}{frac}");
    let mut num = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits })
        .map_err(|_| err())?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(num * Pow::pow(&ten, scale as u32))
    } else {
        Rational::new(num, Pow::pow(&ten, (-scale) as u32))
    };
    Ok(value)
}

/// Canonical textual form: `p/q`, or just `p` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Natural log of a positive rational, robust for values far outside the
/// `f64` range.
pub fn ln_rational(r: &Rational) -> f64 {
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

pub fn ln_bigint(n: &BigInt) -> f64 {
    ln_biguint(n.magnitude())
}

pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Compares the nonnegative integer `a` with `c * base^e` exactly.
///
/// `c` must be positive and `base` at least one; `e` may be any rational.
pub fn cmp_scaled_pow(a: &BigUint, c: &Rational, base: &BigUint, e: &Rational) -> Ordering {
    debug_assert!(c.is_positive());
    debug_assert!(!base.is_zero());
    // a  <=>  (cn/cd) * base^(en/ed)   becomes   (a*cd)^ed * base^-en  <=>  cn^ed
    let ed = e
        .denom()
        .to_u32()
        .expect("exponent denominator exceeds u32");
    let en = e.numer();
    let cn = c.numer().magnitude();
    let cd = c.denom().magnitude();
    let mut lhs: BigUint = Pow::pow(a * cd, ed);
    let mut rhs: BigUint = Pow::pow(cn, ed);
    let en_abs = en
        .magnitude()
        .to_u32()
        .expect("exponent numerator exceeds u32");
    if en.is_negative() {
        lhs *= Pow::pow(base, en_abs);
    } else {
        rhs *= Pow::pow(base, en_abs);
    }
    lhs.cmp(&rhs)
}

fn scaled_pow_estimate(c: &Rational, base: &BigUint, e: &Rational) -> f64 {
    (ln_rational(c) + to_f64(e) * ln_biguint(base)).exp()
}

/// Largest integer `a >= 0` with `a <= c * base^e`.
pub fn floor_scaled_pow(c: &Rational, base: &BigUint, e: &Rational) -> BigUint {
    let est = scaled_pow_estimate(c, base, e);
    let above = |a: &BigUint| cmp_scaled_pow(a, c, base, e) == Ordering::Greater;

    // Exact bracket [lo, hi] with lo not above and hi above.
    let slack = est * 1e-9 + 2.0;
    let mut lo = if est.is_finite() {
        biguint_floor((est - slack).max(0.0)).unwrap_or_default()
    } else {
        BigUint::zero()
    };
    while above(&lo) {
        lo >>= 1;
    }
    let mut hi = if est.is_finite() {
        biguint_floor(est + slack + 1.0).unwrap_or_else(|| lo.clone() + 1u32)
    } else {
        lo.clone() + 1u32
    };
    if hi <= lo {
        hi = lo.clone() + 1u32;
    }
    while !above(&hi) {
        hi = hi * 2u32 + 1u32;
    }
    while &hi - &lo > BigUint::one() {
        let mid = (&lo + &hi) >> 1;
        if above(&mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Smallest integer `a >= 0` with `a >= c * base^e`.
pub fn ceil_scaled_pow(c: &Rational, base: &BigUint, e: &Rational) -> BigUint {
    let floor = floor_scaled_pow(c, base, e);
    if cmp_scaled_pow(&floor, c, base, e) == Ordering::Equal {
        floor
    } else {
        floor + 1u32
    }
}

/// Nearest integer to `c * base^e`, halves rounded up.
pub fn round_scaled_pow(c: &Rational, base: &BigUint, e: &Rational) -> BigUint {
    let twice = floor_scaled_pow(&(c * int(2)), base, e);
    (twice + 1u32) >> 1
}

pub fn min_rational<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max_rational<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a >= b {
        a
    } else {
        b
    }
}

/// Ceiling of a nonnegative rational as an integer.
pub fn ceil_nonneg(r: &Rational) -> BigUint {
    let (q, rem) = r.numer().div_rem(r.denom());
    let q = q.to_biguint().unwrap_or_default();
    if rem.is_zero() {
        q
    } else {
        q + 1u32
    }
}

fn biguint_floor(v: f64) -> Option<BigUint> {
    num_traits::FromPrimitive::from_f64(v.floor())
}

/// Serde adapter storing a [`Rational`] as its canonical string.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = RationalRepr::deserialize(d)?;
        raw.into_rational().map_err(serde::de::Error::custom)
    }

    /// Rationals may arrive as JSON strings (`"2/3"`) or plain numbers.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RationalRepr {
        Text(String),
        Number(serde_json::Number),
    }

    impl RationalRepr {
        pub(crate) fn into_rational(self) -> Result<Rational, ParseRationalError> {
            match self {
                RationalRepr::Text(s) => parse_rational(&s),
                RationalRepr::Number(n) => parse_rational(&n.to_string()),
            }
        }
    }
}

pub mod serde_rational_opt {
    use super::serde_rational::RationalRepr;
    use super::*;

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(r) => s.serialize_some(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let raw = Option::<RationalRepr>::deserialize(d)?;
        raw.map(|r| r.into_rational().map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Serde adapter for large positive integers given as strings or numbers.
pub mod serde_biguint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(value: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<String> = value.iter().map(|v| v.to_string()).collect();
        text.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(u64),
        }
        let raw = Vec::<Repr>::deserialize(d)?;
        raw.into_iter()
            .map(|r| match r {
                Repr::Number(n) => Ok(BigUint::from(n)),
                Repr::Text(s) => parse_big_natural(&s).map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

/// Parses a natural number, also accepting `b^k` power notation (`2^40`).
pub fn parse_big_natural(s: &str) -> Result<BigUint, ParseRationalError> {
    let err = || ParseRationalError {
        input: s.to_string(),
    };
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let base = BigUint::from_str(base.trim()).map_err(|_| err())?;
        let exp: u32 = exp.trim().parse().map_err(|_| err())?;
        return Ok(Pow::pow(&base, exp));
    }
    BigUint::from_str(s).map_err(|_| err())
}

/// Display wrapper printing a rational as `p/q`.
pub struct Display<'a>(pub &'a Rational);

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("2/4").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-7").unwrap(), int(-7));
        assert_eq!(parse_rational("0.3").unwrap(), ratio(3, 10));
        assert_eq!(parse_rational("1.5e-3").unwrap(), ratio(3, 2000));
        assert_eq!(parse_rational("2e2").unwrap(), int(200));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn scaled_power_rounding_matches_hand_values() {
        // 9/4 = 2.25, 9/2 = 4.5
        let q = big(9);
        assert_eq!(ceil_scaled_pow(&ratio(1, 4), &q, &int(1)), big(3));
        assert_eq!(floor_scaled_pow(&ratio(1, 2), &q, &int(1)), big(4));
        // exact hits keep both ends: 8/4 = 2, 8/2 = 4
        assert_eq!(ceil_scaled_pow(&ratio(1, 4), &big(8), &int(1)), big(2));
        assert_eq!(floor_scaled_pow(&ratio(1, 2), &big(8), &int(1)), big(4));
        // sqrt(10) = 3.16..
        assert_eq!(floor_scaled_pow(&int(1), &big(10), &ratio(1, 2)), big(3));
        assert_eq!(ceil_scaled_pow(&int(1), &big(10), &ratio(1, 2)), big(4));
        // 1/4 * 2^12 = 1024 exactly; 1/4 * 2^(40*3/10)
        assert_eq!(
            round_scaled_pow(&ratio(1, 4), &(big(1) << 40), &ratio(3, 10)),
            big(1024)
        );
        // 2.5 rounds up, 2.4 rounds down
        assert_eq!(round_scaled_pow(&ratio(1, 2), &big(5), &int(1)), big(3));
        assert_eq!(round_scaled_pow(&ratio(12, 25), &big(5), &int(1)), big(2));
    }

    #[test]
    fn negative_exponents_compare_exactly() {
        // 4^-1/2 = 1/2, so 0 < 1/2 < 1
        let e = ratio(-1, 2);
        assert_eq!(cmp_scaled_pow(&big(0), &int(1), &big(4), &e), Ordering::Less);
        assert_eq!(cmp_scaled_pow(&big(1), &int(1), &big(4), &e), Ordering::Greater);
        assert_eq!(cmp_scaled_pow(&big(1), &int(2), &big(4), &e), Ordering::Equal);
    }

    #[test]
    fn huge_estimates_still_bracket() {
        let q = big(10).pow(30u32);
        let f = floor_scaled_pow(&ratio(1, 3), &q, &int(2));
        assert_eq!(cmp_scaled_pow(&f, &ratio(1, 3), &q, &int(2)), Ordering::Less);
        let next = &f + 1u32;
        assert_eq!(cmp_scaled_pow(&next, &ratio(1, 3), &q, &int(2)), Ordering::Greater);
    }

    #[test]
    fn big_natural_power_notation() {
        assert_eq!(parse_big_natural("2^40").unwrap(), big(1) << 40);
        assert_eq!(parse_big_natural("12").unwrap(), big(12));
    }

    #[test]
    fn ln_of_big_values_is_finite() {
        let n = BigUint::from(3u32).pow(2000u32);
        let expected = 2000.0 * 3f64.ln();
        assert!((ln_biguint(&n) - expected).abs() < 1e-9 * expected);
    }
}
