//! Cantor subsets of `[0, 1)` defined by restrictions on partial quotients.
//!
//! Every construction here answers one question: given an admissible word of
//! order `n`, which quotients may follow it? The answer is always a contiguous
//! range, tagged with the [`LevelCase`] it produces. Membership in `D_n`,
//! fundamental intervals, level enumeration and sampling are all derived
//! from that single rule.

mod general;
mod schedule;
mod tree;

pub use general::{BaseWordPolicy, GeneralSchedule};
pub use schedule::CantorSchedule;
pub use tree::{LevelTree, TreeNode};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::arith::Rational;
use crate::cf::CfWord;
use crate::geometry::{self, GeometryError, Interval, LengthBracket, LevelCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("window at order {order} is empty: no integer in [{lo}, {hi}] (q = {q})")]
    EmptyWindow {
        order: usize,
        q: String,
        lo: String,
        hi: String,
    },
    #[error("window quotient {0} does not fit in 64 bits")]
    QuotientOverflow(String),
    #[error("level {level} has more than {budget} entries")]
    Explosion { level: usize, budget: usize },
    #[error("no prefix length satisfies q <= Q^(1-delta) <= 2 M q for Q_{k} = {q_k}")]
    SandwichUnsatisfiable { k: usize, q_k: String },
    #[error("order must be at least 1")]
    ZeroOrder,
}

/// Admissible next quotients `lo..=hi` of a word and the shape they give its
/// fundamental interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChildRule {
    pub lo: u64,
    pub hi: u64,
    pub case: LevelCase,
}

impl ChildRule {
    pub fn free(cap: u64) -> Self {
        ChildRule {
            lo: 1,
            hi: cap,
            case: LevelCase::I,
        }
    }

    pub fn forced(a: u64) -> Self {
        ChildRule {
            lo: a,
            hi: a,
            case: LevelCase::II,
        }
    }

    pub fn contains(&self, a: u64) -> bool {
        self.lo <= a && a <= self.hi
    }

    pub fn count(&self) -> u64 {
        self.hi - self.lo + 1
    }
}

/// A Cantor-type construction given by per-word admissible child ranges.
pub trait Construction {
    /// Admissible quotients `a_{n+1}` after `word`. Only meaningful for
    /// admissible words; the rule depends on the prefix, never on later
    /// quotients.
    fn child_rule(&self, word: &CfWord) -> Result<ChildRule, ConstructionError>;

    /// Partial-quotient cap `M` outside the windows.
    fn cap(&self) -> u64;

    /// Promised ratio `g_n / |J_n|` for each case, when the construction
    /// comes with one.
    fn gap_factor(&self, _case: LevelCase) -> Option<Rational> {
        None
    }

    /// Length brackets that `|J_n(word)|` must satisfy.
    fn length_brackets(&self, _word: &CfWord, _case: LevelCase) -> Vec<LengthBracket> {
        Vec::new()
    }

    /// Whether `word` lies in `D_n`, i.e. every quotient is admissible after
    /// its own prefix.
    fn is_member(&self, word: &CfWord) -> Result<bool, ConstructionError> {
        let mut prefix = CfWord::empty();
        for &a in word.quotients() {
            let rule = match self.child_rule(&prefix) {
                Ok(rule) => rule,
                Err(ConstructionError::EmptyWindow { .. }) => return Ok(false),
                Err(e) => return Err(e),
            };
            if !rule.contains(a) {
                return Ok(false);
            }
            prefix.push(a).expect("admissible quotients are positive");
        }
        Ok(true)
    }
}

impl<T: Construction + ?Sized> Construction for &T {
    fn child_rule(&self, word: &CfWord) -> Result<ChildRule, ConstructionError> {
        (**self).child_rule(word)
    }
    fn cap(&self) -> u64 {
        (**self).cap()
    }
    fn gap_factor(&self, case: LevelCase) -> Option<Rational> {
        (**self).gap_factor(case)
    }
    fn length_brackets(&self, word: &CfWord, case: LevelCase) -> Vec<LengthBracket> {
        (**self).length_brackets(word, case)
    }
    fn is_member(&self, word: &CfWord) -> Result<bool, ConstructionError> {
        (**self).is_member(word)
    }
}

/// Numbers with every partial quotient in `[1, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundedType {
    pub cap: u64,
}

impl BoundedType {
    pub fn new(cap: u64) -> Result<Self, ConstructionError> {
        if cap < 1 {
            return Err(ConstructionError::InvalidParameter(
                "M must be at least 1".into(),
            ));
        }
        Ok(BoundedType { cap })
    }
}

impl Construction for BoundedType {
    fn child_rule(&self, _word: &CfWord) -> Result<ChildRule, ConstructionError> {
        Ok(ChildRule::free(self.cap))
    }

    fn cap(&self) -> u64 {
        self.cap
    }

    fn gap_factor(&self, case: LevelCase) -> Option<Rational> {
        (case == LevelCase::I).then(|| Rational::new(1.into(), (2 * self.cap).into()))
    }
}

pub fn is_in_dn<C: Construction + ?Sized>(
    word: &CfWord,
    construction: &C,
) -> Result<bool, ConstructionError> {
    construction.is_member(word)
}

/// How [`enumerate_level`] reacts when a level is larger than the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationMode {
    /// Fail with [`ConstructionError::Explosion`].
    Exhaustive,
    /// Return the first `budget` entries and flag the set as truncated.
    Truncate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelEntry {
    pub word: CfWord,
    pub interval: Interval,
    pub case: LevelCase,
}

/// Words of `D_n` with their fundamental intervals, left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub n: usize,
    pub entries: Vec<LevelEntry>,
    pub truncated: bool,
}

impl LevelSet {
    /// Exact size of the level, known only when nothing was cut off.
    pub fn count(&self) -> Option<usize> {
        (!self.truncated).then_some(self.entries.len())
    }
}

/// Depth-first listing of `D_n` in positional order.
pub fn enumerate_level<C: Construction + ?Sized>(
    construction: &C,
    n: usize,
    budget: usize,
    mode: EnumerationMode,
) -> Result<LevelSet, ConstructionError> {
    if n == 0 {
        return Err(ConstructionError::ZeroOrder);
    }
    let mut entries = Vec::new();
    let mut truncated = false;
    let mut stack = vec![CfWord::empty()];
    while let Some(word) = stack.pop() {
        let rule = construction.child_rule(&word)?;
        if word.len() == n {
            if entries.len() == budget {
                match mode {
                    EnumerationMode::Exhaustive => {
                        return Err(ConstructionError::Explosion { level: n, budget })
                    }
                    EnumerationMode::Truncate => {
                        truncated = true;
                        break;
                    }
                }
            }
            let interval = geometry::hull_for_rule(&word, &rule).map_err(geometry_to_construction)?;
            entries.push(LevelEntry {
                word,
                interval,
                case: rule.case,
            });
            continue;
        }
        // Push in reverse positional order so the leftmost child pops first.
        let left_to_right_increasing = word.len() % 2 == 1;
        let children: Box<dyn Iterator<Item = u64>> = if left_to_right_increasing {
            Box::new((rule.lo..=rule.hi).rev())
        } else {
            Box::new(rule.lo..=rule.hi)
        };
        for a in children {
            stack.push(word.with(a).expect("positive quotient"));
        }
    }
    Ok(LevelSet {
        n,
        entries,
        truncated,
    })
}

fn geometry_to_construction(e: GeometryError) -> ConstructionError {
    match e {
        GeometryError::Construction(inner) => inner,
        other => ConstructionError::InvalidParameter(other.to_string()),
    }
}

/// A word of `D_depth` chosen by uniform branching at every level;
/// reproducible for a fixed seed.
pub fn sample_point<C: Construction + ?Sized>(
    construction: &C,
    depth: usize,
    seed: u64,
) -> Result<CfWord, ConstructionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_point_with(construction, depth, &mut rng)
}

pub fn sample_point_with<C: Construction + ?Sized, R: Rng>(
    construction: &C,
    depth: usize,
    rng: &mut R,
) -> Result<CfWord, ConstructionError> {
    if depth == 0 {
        return Err(ConstructionError::ZeroOrder);
    }
    let mut word = CfWord::empty();
    while word.len() < depth {
        let rule = construction.child_rule(&word)?;
        let a = rng.gen_range(rule.lo..=rule.hi);
        word.push(a).expect("admissible quotients are positive");
    }
    Ok(word)
}

/// Converts a window endpoint to `u64`.
pub(crate) fn quotient_u64(value: &BigUint) -> Result<u64, ConstructionError> {
    u64::try_from(value).map_err(|_| ConstructionError::QuotientOverflow(value.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_type_levels_are_full_powers() {
        let c = BoundedType::new(3).unwrap();
        for n in 1..=4 {
            let level = enumerate_level(&c, n, 1000, EnumerationMode::Exhaustive).unwrap();
            assert_eq!(level.count(), Some(3usize.pow(n as u32)));
        }
    }

    #[test]
    fn enumeration_respects_budget() {
        let c = BoundedType::new(3).unwrap();
        let err = enumerate_level(&c, 4, 50, EnumerationMode::Exhaustive).unwrap_err();
        assert_eq!(err, ConstructionError::Explosion { level: 4, budget: 50 });
        let partial = enumerate_level(&c, 4, 50, EnumerationMode::Truncate).unwrap();
        assert!(partial.truncated);
        assert_eq!(partial.entries.len(), 50);
        assert_eq!(partial.count(), None);
    }

    #[test]
    fn level_is_sorted_left_to_right() {
        let c = BoundedType::new(4).unwrap();
        let level = enumerate_level(&c, 3, 1000, EnumerationMode::Exhaustive).unwrap();
        for pair in level.entries.windows(2) {
            assert!(pair[0].interval.right <= pair[1].interval.left);
        }
    }

    #[test]
    fn zero_order_is_rejected() {
        let c = BoundedType::new(2).unwrap();
        assert_eq!(
            enumerate_level(&c, 0, 10, EnumerationMode::Exhaustive).unwrap_err(),
            ConstructionError::ZeroOrder
        );
        assert_eq!(sample_point(&c, 0, 1).unwrap_err(), ConstructionError::ZeroOrder);
    }
}
