use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::{quotient_u64, ChildRule, Construction, ConstructionError};
use crate::arith::{self, int, ratio, Rational};
use crate::cf::CfWord;
use crate::geometry::{LengthBracket, LevelCase, PowerBound};

/// Forced quotient just before every window.
pub const FORCED_QUOTIENT: u64 = 4;

/// Parameters of the set `E_M`: quotients capped by `M` except at the window
/// positions `n_k - 1` (forced to 4) and `n_k` (between `q^τ/4` and `q^τ/2`
/// of the preceding denominator).
///
/// Windows follow `n_0 = 0`, `n_{k+1} = n_k + m_{k+1} L + 2`. After the last
/// listed window the free blocks continue indefinitely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec")]
pub struct CantorSchedule {
    #[serde(rename = "M")]
    cap: u64,
    #[serde(rename = "L")]
    block_len: usize,
    #[serde(with = "arith::serde_rational")]
    tau: Rational,
    window_blocks: Vec<usize>,
    windows: Vec<usize>,
}

#[derive(Deserialize)]
struct ScheduleSpec {
    #[serde(rename = "M")]
    cap: u64,
    #[serde(rename = "L")]
    block_len: usize,
    #[serde(with = "arith::serde_rational")]
    tau: Rational,
    window_blocks: Vec<usize>,
}

impl TryFrom<ScheduleSpec> for CantorSchedule {
    type Error = ConstructionError;

    fn try_from(spec: ScheduleSpec) -> Result<Self, Self::Error> {
        CantorSchedule::new(spec.cap, spec.block_len, spec.tau, spec.window_blocks)
    }
}

impl CantorSchedule {
    pub fn new(
        cap: u64,
        block_len: usize,
        tau: Rational,
        window_blocks: Vec<usize>,
    ) -> Result<Self, ConstructionError> {
        if cap < 2 {
            return Err(ConstructionError::InvalidParameter(format!(
                "M must be at least 2, got {cap}"
            )));
        }
        if block_len < 2 {
            return Err(ConstructionError::InvalidParameter(format!(
                "L must be at least 2, got {block_len}"
            )));
        }
        if tau < Rational::from_integer(0.into()) {
            return Err(ConstructionError::InvalidParameter(
                "tau must be nonnegative".into(),
            ));
        }
        if window_blocks.is_empty() || window_blocks.contains(&0) {
            return Err(ConstructionError::InvalidParameter(
                "window blocks must be a nonempty list of positive counts".into(),
            ));
        }
        if window_blocks.windows(2).any(|w| w[1] < w[0]) {
            return Err(ConstructionError::InvalidParameter(
                "window blocks must be nondecreasing".into(),
            ));
        }
        let mut windows = Vec::with_capacity(window_blocks.len());
        let mut n = 0usize;
        for &m in &window_blocks {
            n += m * block_len + 2;
            windows.push(n);
        }
        Ok(CantorSchedule {
            cap,
            block_len,
            tau,
            window_blocks,
            windows,
        })
    }

    /// `m_k = 2^k`, capped at `cap_blocks`, for `k = 1..=count`.
    pub fn default_blocks(count: usize, cap_blocks: usize) -> Vec<usize> {
        (1..=count)
            .map(|k| (1usize << k.min(20)).min(cap_blocks.max(1)))
            .collect()
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn tau(&self) -> &Rational {
        &self.tau
    }

    pub fn window_blocks(&self) -> &[usize] {
        &self.window_blocks
    }

    /// `n_1, n_2, ...`
    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    /// Start `n_k` of the stretch containing order `n`, i.e. the largest
    /// window position not exceeding `n` (or 0), with its index `k`.
    pub fn stretch_start(&self, n: usize) -> (usize, usize) {
        let k = self.windows.iter().take_while(|&&w| w <= n).count();
        let start = if k == 0 { 0 } else { self.windows[k - 1] };
        (k, start)
    }

    /// The window `n_{k+1}` following order `n`, if the schedule has one.
    pub fn next_window(&self, n: usize) -> Option<usize> {
        self.windows.iter().copied().find(|&w| w > n)
    }

    /// `[ceil(q^τ/4), floor(q^τ/2)]` for the denominator `q = q_{n_k - 1}`.
    pub fn window_range(&self, q: &BigUint) -> (BigUint, BigUint) {
        (
            arith::ceil_scaled_pow(&ratio(1, 4), q, &self.tau),
            arith::floor_scaled_pow(&ratio(1, 2), q, &self.tau),
        )
    }

    fn case_for_order(&self, n: usize) -> LevelCase {
        match self.next_window(n) {
            Some(w) if n + 2 == w => LevelCase::II,
            Some(w) if n + 1 == w => LevelCase::III,
            _ => LevelCase::I,
        }
    }
}

impl Construction for CantorSchedule {
    fn child_rule(&self, word: &CfWord) -> Result<ChildRule, ConstructionError> {
        let n = word.len();
        match self.case_for_order(n) {
            LevelCase::I => Ok(ChildRule::free(self.cap)),
            LevelCase::II => Ok(ChildRule::forced(FORCED_QUOTIENT)),
            LevelCase::III => {
                let q = word.q_n_unsigned();
                let (lo, hi) = self.window_range(&q);
                if lo > hi || lo < BigUint::one() {
                    return Err(ConstructionError::EmptyWindow {
                        order: n + 1,
                        q: q.to_string(),
                        lo: lo.to_string(),
                        hi: hi.to_string(),
                    });
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

    fn gap_factor(&self, case: LevelCase) -> Option<Rational> {
        Some(match case {
            LevelCase::I => Rational::new(1.into(), (2 * self.cap).into()),
            LevelCase::II => ratio(4, 3),
            LevelCase::III => ratio(1, 3),
        })
    }

    fn length_brackets(&self, word: &CfWord, case: LevelCase) -> Vec<LengthBracket> {
        let q = word.q_n_unsigned();
        let minus_two = int(-2);
        let mut brackets = Vec::new();
        match case {
            LevelCase::I => {
                brackets.push(LengthBracket {
                    label: "case I",
                    lower: PowerBound::new(ratio(1, 6), q.clone(), minus_two.clone()),
                    upper: PowerBound::new(int(1), q, minus_two),
                });
                let n = word.len();
                if n >= 1 && self.windows.contains(&n) {
                    let q_prev = word.q_prev().magnitude().clone();
                    let e = -(int(2) + int(2) * &self.tau);
                    brackets.push(LengthBracket {
                        label: "case I at n_k",
                        lower: PowerBound::new(ratio(2, 3), q_prev.clone(), e.clone()),
                        upper: PowerBound::new(int(16), q_prev, e),
                    });
                }
            }
            LevelCase::II => brackets.push(LengthBracket {
                label: "case II",
                lower: PowerBound::new(ratio(1, 60), q.clone(), minus_two.clone()),
                upper: PowerBound::new(ratio(1, 16), q, minus_two),
            }),
            LevelCase::III => {
                let e = -(int(2) + &self.tau);
                brackets.push(LengthBracket {
                    label: "case III",
                    lower: PowerBound::new(ratio(2, 3), q.clone(), e.clone()),
                    upper: PowerBound::new(int(4), q, e),
                });
            }
        }
        brackets
    }
}
