use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{quotient_u64, ChildRule, Construction, ConstructionError};
use crate::arith::{self, int, ratio, Rational};
use crate::cf::CfWord;
use crate::geometry::LevelCase;

/// How the quotients between windows are fixed when the window positions are
/// located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseWordPolicy {
    /// Positions are computed once along a reference word that repeats
    /// `base_quotient` outside the windows and takes the smallest admissible
    /// window quotient. Every word of the set shares these positions.
    FixedPositions { base_quotient: u64 },
    /// Each word locates its own window positions from its own convergents.
    PerWord,
}

impl Default for BaseWordPolicy {
    fn default() -> Self {
        BaseWordPolicy::FixedPositions { base_quotient: 1 }
    }
}

/// Parameters of `E*_M` for a general approximating function.
///
/// For each `Q_k` the window sits at `n_k`, where `n_k - 2` is the first index
/// past the previous window with `2 M q_{n_k-2} >= Q_k^{1-δ}`; this index must
/// also satisfy `q_{n_k-2} <= Q_k^{1-δ}`. The quotient at `n_k - 1` is
/// `round(Q_k^δ / 4)` and the one at `n_k` lies in
/// `[q^{τ-ε}/2, q^{τ-ε}]` for `q = q_{n_k-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneralSpec")]
pub struct GeneralSchedule {
    #[serde(rename = "Q_seq", with = "arith::serde_biguint_vec")]
    q_seq: Vec<BigUint>,
    #[serde(with = "arith::serde_rational")]
    delta: Rational,
    #[serde(with = "arith::serde_rational")]
    epsilon: Rational,
    #[serde(rename = "M")]
    cap: u64,
    #[serde(with = "arith::serde_rational")]
    tau: Rational,
    base_word_policy: BaseWordPolicy,
    forced: Vec<u64>,
    /// Window positions along the reference word; empty under
    /// [`BaseWordPolicy::PerWord`].
    windows: Vec<usize>,
}

#[derive(Deserialize)]
struct GeneralSpec {
    #[serde(rename = "Q_seq", with = "arith::serde_biguint_vec")]
    q_seq: Vec<BigUint>,
    #[serde(with = "arith::serde_rational")]
    delta: Rational,
    #[serde(with = "arith::serde_rational")]
    epsilon: Rational,
    #[serde(rename = "M")]
    cap: u64,
    #[serde(with = "arith::serde_rational")]
    tau: Rational,
    #[serde(default)]
    base_word_policy: BaseWordPolicy,
}

impl TryFrom<GeneralSpec> for GeneralSchedule {
    type Error = ConstructionError;

    fn try_from(s: GeneralSpec) -> Result<Self, Self::Error> {
        GeneralSchedule::new(s.q_seq, s.delta, s.epsilon, s.cap, s.tau, s.base_word_policy)
    }
}

/// Where order `n + 1` falls relative to the windows of a word.
enum Slot {
    Free,
    Forced(u64),
    Window,
}

impl GeneralSchedule {
    pub fn new(
        q_seq: Vec<BigUint>,
        delta: Rational,
        epsilon: Rational,
        cap: u64,
        tau: Rational,
        base_word_policy: BaseWordPolicy,
    ) -> Result<Self, ConstructionError> {
        let invalid = |msg: String| Err(ConstructionError::InvalidParameter(msg));
        if cap < 2 {
            return invalid(format!("M must be at least 2, got {cap}"));
        }
        if epsilon <= Rational::zero() {
            return invalid("epsilon must be positive".into());
        }
        if delta < &epsilon * int(3) {
            return invalid(format!(
                "delta = {} must be at least 3 epsilon = {}",
                arith::Display(&delta),
                arith::Display(&(&epsilon * int(3)))
            ));
        }
        if delta >= int(1) {
            return invalid("delta must be below 1".into());
        }
        if tau < Rational::zero() {
            return invalid("tau must be nonnegative".into());
        }
        if q_seq.is_empty() {
            return invalid("Q sequence must be nonempty".into());
        }
        if q_seq.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("Q sequence must be strictly increasing".into());
        }
        if let BaseWordPolicy::FixedPositions { base_quotient } = base_word_policy {
            if base_quotient == 0 || base_quotient > cap {
                return invalid(format!("base quotient must lie in [1, {cap}]"));
            }
        }
        let mut forced = Vec::with_capacity(q_seq.len());
        for (k, q) in q_seq.iter().enumerate() {
            let a = arith::round_scaled_pow(&ratio(1, 4), q, &delta);
            if a.is_zero() {
                return invalid(format!("forced quotient for Q_{} rounds to 0", k + 1));
            }
            forced.push(quotient_u64(&a)?);
        }
        let mut schedule = GeneralSchedule {
            q_seq,
            delta,
            epsilon,
            cap,
            tau,
            base_word_policy,
            forced,
            windows: Vec::new(),
        };
        if let BaseWordPolicy::FixedPositions { base_quotient } = base_word_policy {
            schedule.windows = schedule.reference_windows(base_quotient)?;
        }
        Ok(schedule)
    }

    pub fn q_seq(&self) -> &[BigUint] {
        &self.q_seq
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn tau(&self) -> &Rational {
        &self.tau
    }

    pub fn policy(&self) -> BaseWordPolicy {
        self.base_word_policy
    }

    /// `round(Q_k^δ / 4)` for `k = 1, 2, ...`.
    pub fn forced_quotients(&self) -> &[u64] {
        &self.forced
    }

    /// Window positions `n_k` of the reference word (fixed positions only).
    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    /// `[ceil(q^{τ-ε}/2), floor(q^{τ-ε})]`.
    pub fn window_range(&self, q: &BigUint) -> (BigUint, BigUint) {
        let e = &self.tau - &self.epsilon;
        (
            arith::ceil_scaled_pow(&ratio(1, 2), q, &e),
            arith::floor_scaled_pow(&int(1), q, &e),
        )
    }

    fn one_minus_delta(&self) -> Rational {
        int(1) - &self.delta
    }

    /// Sandwich test for `q_j` against `Q_k`: `Less` while `2 M q_j` is still
    /// below `Q_k^{1-δ}`, `Equal` once the sandwich holds, `Greater` when
    /// `q_j` has overshot the target.
    fn sandwich(&self, q: &BigUint, k: usize) -> Ordering {
        let target_exp = self.one_minus_delta();
        let big_q = &self.q_seq[k];
        let scaled = Rational::new(1.into(), (2 * self.cap).into());
        if arith::cmp_scaled_pow(q, &scaled, big_q, &target_exp) == Ordering::Less {
            return Ordering::Less;
        }
        if arith::cmp_scaled_pow(q, &int(1), big_q, &target_exp) == Ordering::Greater {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    }

    fn unsatisfiable(&self, k: usize) -> ConstructionError {
        ConstructionError::SandwichUnsatisfiable {
            k: k + 1,
            q_k: self.q_seq[k].to_string(),
        }
    }

    fn reference_windows(&self, base: u64) -> Result<Vec<usize>, ConstructionError> {
        let mut word = CfWord::empty();
        let mut windows = Vec::with_capacity(self.q_seq.len());
        for k in 0..self.q_seq.len() {
            // j runs over n_{k-1} + 1, n_{k-1} + 2, ...
            word.push(base).expect("positive");
            loop {
                match self.sandwich(&word.q_n_unsigned(), k) {
                    Ordering::Less => word.push(base).expect("positive"),
                    Ordering::Equal => break,
                    Ordering::Greater => return Err(self.unsatisfiable(k)),
                }
            }
            word.push(self.forced[k]).expect("forced quotient is positive");
            let (lo, hi) = self.window_range(&word.q_n_unsigned());
            if lo > hi || lo.is_zero() {
                return Err(self.empty_window(word.len() + 1, &word.q_n_unsigned(), lo, hi));
            }
            word.push(quotient_u64(&lo)?).expect("positive");
            windows.push(word.len());
        }
        Ok(windows)
    }

    fn empty_window(&self, order: usize, q: &BigUint, lo: BigUint, hi: BigUint) -> ConstructionError {
        ConstructionError::EmptyWindow {
            order,
            q: q.to_string(),
            lo: lo.to_string(),
            hi: hi.to_string(),
        }
    }

    /// Role of order `word.len() + 1` for this particular word.
    fn slot(&self, word: &CfWord) -> Result<Slot, ConstructionError> {
        let next = word.len() + 1;
        match self.base_word_policy {
            BaseWordPolicy::FixedPositions { .. } => {
                for (k, &w) in self.windows.iter().enumerate() {
                    if next + 1 == w {
                        return Ok(Slot::Forced(self.forced[k]));
                    }
                    if next == w {
                        return Ok(Slot::Window);
                    }
                }
                Ok(Slot::Free)
            }
            BaseWordPolicy::PerWord => {
                let n = word.len();
                let mut start = 0usize;
                for k in 0..self.q_seq.len() {
                    let mut j = start + 1;
                    let j_k = loop {
                        if j > n {
                            return Ok(Slot::Free);
                        }
                        let q = word.q(j as isize).magnitude();
                        match self.sandwich(q, k) {
                            Ordering::Less => j += 1,
                            Ordering::Equal => break j,
                            Ordering::Greater => return Err(self.unsatisfiable(k)),
                        }
                    };
                    let window = j_k + 2;
                    if next == window - 1 {
                        return Ok(Slot::Forced(self.forced[k]));
                    }
                    if next == window {
                        return Ok(Slot::Window);
                    }
                    start = window;
                }
                Ok(Slot::Free)
            }
        }
    }
}

impl Construction for GeneralSchedule {
    fn child_rule(&self, word: &CfWord) -> Result<ChildRule, ConstructionError> {
        match self.slot(word)? {
            Slot::Free => Ok(ChildRule::free(self.cap)),
            Slot::Forced(a) => Ok(ChildRule::forced(a)),
            Slot::Window => {
                let q = word.q_n_unsigned();
                let (lo, hi) = self.window_range(&q);
                if lo > hi || lo < BigUint::one() {
                    return Err(self.empty_window(word.len() + 1, &q, lo, hi));
                }
                Ok(ChildRule {
                    lo: quotient_u64(&lo)?,
                    hi: quotient_u64(&hi)?,
                    case: LevelCase::III,
                })
            }
        }
    }

    fn cap(&self) -> u64 {
        self.cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{is_in_dn, sample_point};
    use num_traits::Pow;

    fn pow2(k: u32) -> BigUint {
        Pow::pow(BigUint::from(2u32), k)
    }

    fn sandwich_holds(q: &BigUint, big_q: &BigUint, delta: &Rational, cap: u64) -> bool {
        // Oracle in floating point with a wide margin, only used away from ties.
        let t = (1.0 - arith::to_f64(delta)) * arith::ln_biguint(big_q);
        let lq = arith::ln_biguint(q);
        lq <= t + 1e-12 && t <= (2.0 * cap as f64).ln() + lq + 1e-12
    }

    #[test]
    fn first_window_for_two_to_the_forty() {
        let s = GeneralSchedule::new(
            vec![pow2(40)],
            ratio(3, 10),
            ratio(1, 10),
            2,
            int(1),
            BaseWordPolicy::FixedPositions { base_quotient: 1 },
        )
        .unwrap();
        let n1 = s.windows()[0];
        // Fibonacci reference word: q_j = F_{j+1}.
        let mut fib = vec![BigUint::one(), BigUint::one()];
        while fib.len() < n1 + 2 {
            let next = &fib[fib.len() - 1] + &fib[fib.len() - 2];
            fib.push(next);
        }
        let q = &fib[n1 - 2];
        assert!(sandwich_holds(q, &pow2(40), &ratio(3, 10), 2));
        // First Fibonacci number with 4 q >= 2^28 is 102334155.
        assert_eq!(q, &BigUint::from(102_334_155u64));
        // round(2^12 / 4) = 1024
        assert_eq!(s.forced_quotients(), &[1024]);
    }

    #[test]
    fn parameter_checks() {
        let mk = |d, e, q: Vec<BigUint>| {
            GeneralSchedule::new(q, d, e, 2, int(1), BaseWordPolicy::PerWord)
        };
        assert!(mk(ratio(2, 10), ratio(1, 10), vec![pow2(40)]).is_err());
        assert!(mk(ratio(3, 10), int(0), vec![pow2(40)]).is_err());
        assert!(mk(ratio(3, 10), ratio(1, 10), vec![pow2(40), pow2(40)]).is_err());
        assert!(mk(ratio(3, 10), ratio(1, 10), vec![pow2(40), pow2(80)]).is_ok());
    }

    #[test]
    fn slow_growth_is_unsatisfiable() {
        let err = GeneralSchedule::new(
            vec![pow2(40), pow2(41)],
            ratio(3, 10),
            ratio(1, 10),
            2,
            int(1),
            BaseWordPolicy::FixedPositions { base_quotient: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, ConstructionError::SandwichUnsatisfiable { k: 2, .. }));
    }

    #[test]
    fn tiny_window_is_empty() {
        // τ < ε puts q^{τ-ε} below 1.
        let err = GeneralSchedule::new(
            vec![BigUint::from(1u32 << 20)],
            ratio(1, 2),
            ratio(1, 10),
            2,
            int(0),
            BaseWordPolicy::FixedPositions { base_quotient: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, ConstructionError::EmptyWindow { .. }));
    }

    #[test]
    fn per_word_samples_hit_their_windows() {
        let s = GeneralSchedule::new(
            vec![pow2(20), pow2(60)],
            ratio(3, 10),
            ratio(1, 10),
            3,
            int(1),
            BaseWordPolicy::PerWord,
        )
        .unwrap();
        for seed in 0..10 {
            let word = sample_point(&s, 40, seed).unwrap();
            assert!(is_in_dn(&word, &s).unwrap());
            let pos = word
                .quotients()
                .iter()
                .position(|&a| a == s.forced_quotients()[0])
                .expect("forced quotient present");
            // The forced quotient sits at n_1 - 1, so q_{n_1 - 2} is q_pos.
            let j = pos;
            let q = word.q(j as isize).magnitude().clone();
            assert!(sandwich_holds(&q, &pow2(20), &ratio(3, 10), 3));
        }
    }

    #[test]
    fn fixed_positions_are_shared() {
        let s = GeneralSchedule::new(
            vec![pow2(20), pow2(60)],
            ratio(3, 10),
            ratio(1, 10),
            3,
            int(1),
            BaseWordPolicy::FixedPositions { base_quotient: 2 },
        )
        .unwrap();
        let n1 = s.windows()[0];
        for seed in 0..10 {
            let word = sample_point(&s, n1 + 3, seed).unwrap();
            assert_eq!(word.a(n1 - 1), s.forced_quotients()[0]);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let json = r#"{"Q_seq":["2^20","2^60"],"delta":"3/10","epsilon":"1/10","M":3,"tau":1,
                      "base_word_policy":{"fixed_positions":{"base_quotient":1}}}"#;
        let s: GeneralSchedule = serde_json::from_str(json).unwrap();
        let back: GeneralSchedule =
            serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        let per_word = r#"{"Q_seq":[1000000],"delta":"3/10","epsilon":"1/10","M":3,"tau":1,
                          "base_word_policy":"per_word"}"#;
        let s: GeneralSchedule = serde_json::from_str(per_word).unwrap();
        assert_eq!(s.policy(), BaseWordPolicy::PerWord);
    }
}
