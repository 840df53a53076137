//! Exact continued fractions of numbers in `[0, 1)`.
//!
//! A [`CfWord`] is a finite string of partial quotients `(a_1, ..., a_n)`
//! together with its convergents `p_i / q_i`, generated from the seeds
//! `(p_{-1}, q_{-1}) = (1, 0)` and `(p_0, q_0) = (0, 1)` by
//!
//! ```text
//! p_{i+1} = a_{i+1} p_i + p_{i-1}
//! q_{i+1} = a_{i+1} q_i + q_{i-1}
//! ```

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfError {
    #[error("{0} is outside [0, 1)")]
    Domain(String),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },
    #[error("tail value theta_{{{next}}} is undefined: expansion has length {len}")]
    TailUndefined { next: usize, len: usize },
    #[error("partial quotients must be positive")]
    ZeroQuotient,
    #[error("Dirichlet parameter t must exceed 1, got {0}")]
    DirichletParameter(String),
}

/// Finite continued-fraction word with cached convergents.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CfWord {
    quotients: Vec<u64>,
    // Index i holds (p_{i-1}, q_{i-1}), so index 0 is the (1, 0) seed.
    convergents: Vec<(BigInt, BigInt)>,
    truncated: bool,
}

impl CfWord {
    pub fn empty() -> Self {
        CfWord {
            quotients: Vec::new(),
            convergents: vec![
                (BigInt::one(), BigInt::zero()),
                (BigInt::zero(), BigInt::one()),
            ],
            truncated: false,
        }
    }

    pub fn new(quotients: &[u64]) -> Result<Self, CfError> {
        let mut word = CfWord::empty();
        for &a in quotients {
            word.push(a)?;
        }
        Ok(word)
    }

    /// Builds a word from quotients known to be positive.
    ///
    /// # Panics
    /// Panics if any quotient is zero.
    pub fn from_quotients(quotients: &[u64]) -> Self {
        CfWord::new(quotients).expect("partial quotients must be positive")
    }

    pub fn push(&mut self, a: u64) -> Result<(), CfError> {
        if a == 0 {
            return Err(CfError::ZeroQuotient);
        }
        let n = self.convergents.len();
        let (p1, q1) = &self.convergents[n - 1];
        let (p0, q0) = &self.convergents[n - 2];
        let a_big = BigInt::from(a);
        let next = (&a_big * p1 + p0, &a_big * q1 + q0);
        self.convergents.push(next);
        self.quotients.push(a);
        Ok(())
    }

    pub fn with(&self, a: u64) -> Result<Self, CfError> {
        let mut child = self.clone();
        child.truncated = false;
        child.push(a)?;
        Ok(child)
    }

    /// The prefix `(a_1, ..., a_n)`.
    pub fn prefix(&self, n: usize) -> CfWord {
        let n = n.min(self.len());
        CfWord {
            quotients: self.quotients[..n].to_vec(),
            convergents: self.convergents[..n + 2].to_vec(),
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    /// `a_i` for `1 <= i <= n`.
    pub fn a(&self, i: usize) -> u64 {
        self.quotients[i - 1]
    }

    pub fn last_quotient(&self) -> Option<u64> {
        self.quotients.last().copied()
    }

    /// `p_i` for `-1 <= i <= n`.
    pub fn p(&self, i: isize) -> &BigInt {
        &self.convergents[(i + 1) as usize].0
    }

    /// `q_i` for `-1 <= i <= n`.
    pub fn q(&self, i: isize) -> &BigInt {
        &self.convergents[(i + 1) as usize].1
    }

    pub fn q_n(&self) -> &BigInt {
        &self.convergents[self.convergents.len() - 1].1
    }

    pub fn q_prev(&self) -> &BigInt {
        &self.convergents[self.convergents.len() - 2].1
    }

    pub fn p_n(&self) -> &BigInt {
        &self.convergents[self.convergents.len() - 1].0
    }

    pub fn p_prev(&self) -> &BigInt {
        &self.convergents[self.convergents.len() - 2].0
    }

    pub fn q_n_unsigned(&self) -> BigUint {
        self.q_n().magnitude().clone()
    }

    /// Set when the word is a truncation of a longer (or infinite) expansion.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Canonical finite words end with a quotient of at least 2.
    pub fn is_canonical(&self) -> bool {
        self.last_quotient().is_none_or(|a| a >= 2)
    }

    /// Convergents `(p_i, q_i)` for `i = 0..=n`, seed `(0, 1)` first.
    pub fn convergents(&self) -> &[(BigInt, BigInt)] {
        &self.convergents[1..]
    }

    /// The suffix `(a_{k+1}, ..., a_n)` as a fresh word.
    pub fn suffix(&self, k: usize) -> CfWord {
        CfWord::from_quotients(&self.quotients[k.min(self.len())..])
    }
}

impl fmt::Debug for CfWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CfWord{:?}", self.quotients)?;
        if self.truncated {
            f.write_str("+")?;
        }
        Ok(())
    }
}

impl fmt::Display for CfWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.quotients.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

impl Serialize for CfWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.quotients.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CfWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let quotients = Vec::<u64>::deserialize(d)?;
        CfWord::new(&quotients).map_err(serde::de::Error::custom)
    }
}

/// Expands `x` in `[0, 1)` for at most `max_depth` quotients.
///
/// Terminating expansions come out canonical (last quotient at least 2).
/// When the budget runs out first the returned word is flagged truncated.
pub fn cf_expand(x: &Rational, max_depth: usize) -> Result<CfWord, CfError> {
    if max_depth == 0 {
        return Err(CfError::ZeroDepth);
    }
    if x.is_negative() || x >= &Rational::one() {
        return Err(CfError::Domain(arith::format_rational(x)));
    }
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    let mut word = CfWord::empty();
    while !num.is_zero() {
        if word.len() == max_depth {
            word.truncated = true;
            break;
        }
        let a = &den / &num;
        let rem = &den - &a * &num;
        let a = u64::try_from(&a).map_err(|_| CfError::Domain(arith::format_rational(x)))?;
        word.push(a)?;
        den = num;
        num = rem;
    }
    Ok(word)
}

/// Full expansion of a rational; always terminates.
pub fn cf_expand_full(x: &Rational) -> Result<CfWord, CfError> {
    // Euclid on a denominator with b bits takes fewer than 1.5 b + 2 steps.
    let bound = (x.denom().bits() as usize) * 3 / 2 + 4;
    cf_expand(x, bound)
}

/// Exact value of the finite continued fraction, `p_n / q_n`.
pub fn word_value(word: &CfWord) -> Rational {
    Rational::new(word.p_n().clone(), word.q_n().clone())
}

/// Value of the reversed prefix `[a_n, a_{n-1}, ..., a_1]`.
pub fn reversed_value(word: &CfWord, n: usize) -> Result<Rational, CfError> {
    if n == 0 || n > word.len() {
        return Err(CfError::Index {
            index: n,
            len: word.len(),
        });
    }
    let mut value = Rational::zero();
    for i in 1..=n {
        value = (Rational::from_integer(BigInt::from(word.a(i))) + value).recip();
    }
    Ok(value)
}

/// Both sides of the identity `(1 + theta_{n+1} phi_n)^{-1} = q_n |q_{n-1} x - p_{n-1}|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CasselsReport {
    pub n: usize,
    #[serde(with = "arith::serde_rational")]
    pub theta_next: Rational,
    #[serde(with = "arith::serde_rational")]
    pub phi_n: Rational,
    #[serde(with = "arith::serde_rational")]
    pub lhs: Rational,
    #[serde(with = "arith::serde_rational")]
    pub rhs: Rational,
    #[serde(with = "arith::serde_rational")]
    pub residual: Rational,
}

pub fn cassels_check(x: &Rational, n: usize) -> Result<CasselsReport, CfError> {
    let word = cf_expand_full(x)?;
    cassels_check_word(&word, x, n)
}

/// Same as [`cassels_check`] with the expansion of `x` already at hand.
pub fn cassels_check_word(word: &CfWord, x: &Rational, n: usize) -> Result<CasselsReport, CfError> {
    if n == 0 || n >= word.len() {
        return Err(CfError::TailUndefined {
            next: n + 1,
            len: word.len(),
        });
    }
    let theta_next = word_value(&word.suffix(n));
    let phi_n = reversed_value(word, n)?;
    let lhs = (Rational::one() + &theta_next * &phi_n).recip();
    let n = n as isize;
    let q_prev = Rational::from_integer(word.q(n - 1).clone());
    let p_prev = Rational::from_integer(word.p(n - 1).clone());
    let rhs = Rational::from_integer(word.q(n).clone()) * (q_prev * x - p_prev).abs();
    let residual = &lhs - &rhs;
    Ok(CasselsReport {
        n: n as usize,
        theta_next,
        phi_n,
        lhs,
        rhs,
        residual,
    })
}

/// Integers `(p, q)` with `|q x - p| <= 1/t` and `1 <= q < t`, taken from the
/// convergent with `q_n < t <= q_{n+1}`.
pub fn dirichlet_solve(x: &Rational, t: &Rational) -> Result<(BigInt, BigInt), CfError> {
    if t <= &Rational::one() {
        return Err(CfError::DirichletParameter(arith::format_rational(t)));
    }
    let word = cf_expand_full(x)?;
    let mut best = 0isize;
    for i in 1..=word.len() as isize {
        if Rational::from_integer(word.q(i).clone()) < *t {
            best = i;
        } else {
            break;
        }
    }
    Ok((word.p(best).clone(), word.q(best).clone()))
}

/// Eventually periodic expansion `[pre_1, ..., pre_k, (per_1, ..., per_m)^∞]`,
/// the exact representation of a quadratic irrational in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicCf {
    pub preperiod: Vec<u64>,
    pub period: Vec<u64>,
}

impl PeriodicCf {
    pub fn new(preperiod: Vec<u64>, period: Vec<u64>) -> Result<Self, CfError> {
        if period.is_empty() || preperiod.iter().chain(&period).any(|&a| a == 0) {
            return Err(CfError::ZeroQuotient);
        }
        Ok(PeriodicCf { preperiod, period })
    }

    pub fn quotient(&self, i: usize) -> u64 {
        let k = self.preperiod.len();
        if i <= k {
            self.preperiod[i - 1]
        } else {
            self.period[(i - k - 1) % self.period.len()]
        }
    }

    /// First `n` quotients, flagged as a truncation.
    pub fn truncate(&self, n: usize) -> CfWord {
        let quotients: Vec<u64> = (1..=n).map(|i| self.quotient(i)).collect();
        let mut word = CfWord::from_quotients(&quotients);
        word.truncated = true;
        word
    }

    /// The tail `[a_{n+1}, a_{n+2}, ...]`, again eventually periodic.
    pub fn tail(&self, n: usize) -> PeriodicCf {
        let k = self.preperiod.len();
        if n <= k {
            PeriodicCf {
                preperiod: self.preperiod[n..].to_vec(),
                period: self.period.clone(),
            }
        } else {
            let shift = (n - k) % self.period.len();
            let mut period = self.period[shift..].to_vec();
            period.extend_from_slice(&self.period[..shift]);
            PeriodicCf {
                preperiod: Vec::new(),
                period,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, ratio};

    fn pairs(word: &CfWord) -> Vec<(i64, i64)> {
        word.convergents()
            .iter()
            .map(|(p, q)| (i64::try_from(p).unwrap(), i64::try_from(q).unwrap()))
            .collect()
    }

    #[test]
    fn expands_hand_examples() {
        let zero = cf_expand(&int(0), 10).unwrap();
        assert!(zero.is_empty() && !zero.is_truncated());
        assert_eq!(cf_expand(&ratio(2, 3), 10).unwrap().quotients(), &[1, 2]);
        let w = cf_expand(&ratio(5, 8), 10).unwrap();
        assert_eq!(w.quotients(), &[1, 1, 1, 2]);
        assert_eq!(word_value(&w), ratio(5, 8));
    }

    #[test]
    fn expansion_rejects_out_of_domain() {
        assert!(matches!(cf_expand(&ratio(8, 5), 10), Err(CfError::Domain(_))));
        assert!(matches!(cf_expand(&int(1), 10), Err(CfError::Domain(_))));
        assert!(matches!(cf_expand(&ratio(-1, 5), 10), Err(CfError::Domain(_))));
        assert_eq!(cf_expand(&ratio(1, 5), 0), Err(CfError::ZeroDepth));
    }

    #[test]
    fn truncation_is_flagged() {
        let w = cf_expand(&ratio(5, 8), 2).unwrap();
        assert_eq!(w.quotients(), &[1, 1]);
        assert!(w.is_truncated());
    }

    #[test]
    fn convergent_tables() {
        assert_eq!(pairs(&CfWord::empty()), vec![(0, 1)]);
        assert_eq!(
            pairs(&CfWord::from_quotients(&[1, 1, 1]))[1..],
            [(1, 1), (1, 2), (2, 3)]
        );
        let w = CfWord::from_quotients(&[1, 2, 3]);
        assert_eq!(pairs(&w)[1..], [(1, 1), (2, 3), (7, 10)]);
        let det = w.p(2) * w.q(3) - w.p(3) * w.q(2);
        assert_eq!(det, BigInt::from(-1));
    }

    #[test]
    fn word_values_including_aliases() {
        assert_eq!(word_value(&CfWord::empty()), int(0));
        assert_eq!(word_value(&CfWord::from_quotients(&[1, 2])), ratio(2, 3));
        let alias = CfWord::from_quotients(&[1, 1, 1]);
        assert_eq!(word_value(&alias), ratio(2, 3));
        assert!(!alias.is_canonical());
    }

    #[test]
    fn reversed_values() {
        let w = CfWord::from_quotients(&[1, 2]);
        assert_eq!(reversed_value(&w, 2).unwrap(), ratio(1, 3));
        let w = CfWord::from_quotients(&[1, 1, 1, 2]);
        assert_eq!(reversed_value(&w, 3).unwrap(), ratio(2, 3));
        let w = CfWord::from_quotients(&[7, 3]);
        assert_eq!(reversed_value(&w, 1).unwrap(), ratio(1, 7));
        assert!(matches!(reversed_value(&w, 0), Err(CfError::Index { .. })));
        assert!(matches!(reversed_value(&w, 3), Err(CfError::Index { .. })));
    }

    #[test]
    fn cassels_hand_examples() {
        let r = cassels_check(&ratio(5, 8), 3).unwrap();
        assert_eq!(r.theta_next, ratio(1, 2));
        assert_eq!(r.phi_n, ratio(2, 3));
        assert_eq!(r.lhs, ratio(3, 4));
        assert_eq!(r.rhs, ratio(3, 4));
        assert!(r.residual.is_zero());

        let r = cassels_check(&ratio(2, 3), 1).unwrap();
        assert_eq!(r.theta_next, ratio(1, 2));
        assert_eq!(r.phi_n, int(1));
        assert_eq!(r.lhs, ratio(2, 3));
        assert!(r.residual.is_zero());
    }

    #[test]
    fn cassels_needs_a_tail() {
        assert!(matches!(
            cassels_check(&ratio(5, 8), 4),
            Err(CfError::TailUndefined { .. })
        ));
        assert!(matches!(
            cassels_check(&ratio(5, 8), 0),
            Err(CfError::TailUndefined { .. })
        ));
    }

    #[test]
    fn dirichlet_examples() {
        let (p, q) = dirichlet_solve(&ratio(5, 8), &int(4)).unwrap();
        assert_eq!((p, q), (BigInt::from(2), BigInt::from(3)));
        let (p, q) = dirichlet_solve(&int(0), &int(17)).unwrap();
        assert_eq!((p, q), (BigInt::from(0), BigInt::from(1)));
        let (p, q) = dirichlet_solve(&ratio(1, 2), &int(3)).unwrap();
        assert_eq!((p, q), (BigInt::from(1), BigInt::from(2)));
        assert!(dirichlet_solve(&ratio(1, 2), &int(1)).is_err());
    }

    #[test]
    fn periodic_tails_and_truncations() {
        // sqrt(2) - 1 = [2, 2, 2, ...]
        let s = PeriodicCf::new(vec![], vec![2]).unwrap();
        let w = s.truncate(5);
        assert!(w.is_truncated());
        assert_eq!(w.quotients(), &[2, 2, 2, 2, 2]);
        assert_eq!(s.tail(3), s);
        let t = PeriodicCf::new(vec![1, 4], vec![1, 2, 3]).unwrap();
        assert_eq!(t.quotient(6), 1);
        assert_eq!(t.tail(1).preperiod, vec![4]);
        assert_eq!(t.tail(3).period, vec![2, 3, 1]);
        assert_eq!(t.tail(3).quotient(1), t.quotient(4));
    }
}
