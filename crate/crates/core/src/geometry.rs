//! Exact geometry of basic cylinders and fundamental intervals.
//!
//! A basic cylinder `I_n(a_1, ..., a_n)` is the set of points whose expansion
//! starts with the given word. For even `n` it is
//! `[p_n/q_n, (p_n+p_{n-1})/(q_n+q_{n-1}))`, for odd `n` the mirror image
//! `((p_n+p_{n-1})/(q_n+q_{n-1}), p_n/q_n]`. Its children are laid out left to
//! right in increasing `a_{n+1}` when `n` is odd and right to left when `n` is
//! even.
//!
//! A fundamental interval `J_n` is the hull of the admissible children of a
//! word under some [`Construction`]. Admissible children always form a
//! contiguous range of quotients, so the hull is exactly their union.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arith::{self, Rational};
use crate::cantor::{ChildRule, Construction, ConstructionError};
use crate::cf::CfWord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate interval [{0}, {1}]")]
    Degenerate(String, String),
    #[error("word {0} is not admissible for this construction")]
    NotMember(String),
    #[error("word {0} has no same-order neighbour on either side")]
    NoSibling(String),
    #[error("intervals for {0} and its neighbour overlap")]
    Overlap(String),
    #[error("the empty word has no siblings")]
    EmptyWord,
    #[error("quotient range {lo}..={hi} is empty")]
    EmptyRange { lo: u64, hi: u64 },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Which of the three fundamental-interval shapes a word of order `n` has,
/// determined by its admissible children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LevelCase {
    /// Free children `a_{n+1}` in `[1, M]`.
    I,
    /// A single forced child.
    II,
    /// A window of children near a power of `q_n`.
    III,
}

impl fmt::Display for LevelCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelCase::I => "I",
            LevelCase::II => "II",
            LevelCase::III => "III",
        })
    }
}

/// Interval with exact rational endpoints. `left < right` always holds.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub left: Rational,
    pub right: Rational,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl Interval {
    pub fn new(
        left: Rational,
        right: Rational,
        left_closed: bool,
        right_closed: bool,
    ) -> Result<Self, GeometryError> {
        if left >= right {
            return Err(GeometryError::Degenerate(
                arith::format_rational(&left),
                arith::format_rational(&right),
            ));
        }
        Ok(Interval {
            left,
            right,
            left_closed,
            right_closed,
        })
    }

    pub fn closed(left: Rational, right: Rational) -> Result<Self, GeometryError> {
        Interval::new(left, right, true, true)
    }

    pub fn length(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn midpoint(&self) -> Rational {
        (&self.left + &self.right) / arith::int(2)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let above = match x.cmp(&self.left) {
            Ordering::Greater => true,
            Ordering::Equal => self.left_closed,
            Ordering::Less => false,
        };
        let below = match x.cmp(&self.right) {
            Ordering::Less => true,
            Ordering::Equal => self.right_closed,
            Ordering::Greater => false,
        };
        above && below
    }

    /// Set containment, respecting open and closed ends.
    pub fn contains_interval(&self, other: &Interval) -> bool {
        let left_ok = match self.left.cmp(&other.left) {
            Ordering::Less => true,
            Ordering::Equal => self.left_closed || !other.left_closed,
            Ordering::Greater => false,
        };
        let right_ok = match self.right.cmp(&other.right) {
            Ordering::Greater => true,
            Ordering::Equal => self.right_closed || !other.right_closed,
            Ordering::Less => false,
        };
        left_ok && right_ok
    }

    /// Containment of closures, ignoring endpoint flags.
    pub fn closure_contains(&self, other: &Interval) -> bool {
        self.left <= other.left && other.right <= self.right
    }

    /// True when the two sets share no point.
    pub fn is_disjoint(&self, other: &Interval) -> bool {
        let (a, b) = if self.left <= other.left {
            (self, other)
        } else {
            (other, self)
        };
        match a.right.cmp(&b.left) {
            Ordering::Less => true,
            Ordering::Equal => !(a.right_closed && b.left_closed),
            Ordering::Greater => false,
        }
    }

    /// Distance between the closures; zero when they touch or overlap.
    pub fn distance(&self, other: &Interval) -> Rational {
        if self.right <= other.left {
            &other.left - &self.right
        } else if other.right <= self.left {
            &self.left - &other.right
        } else {
            Rational::zero()
        }
    }

    /// Whether the closure meets the open ball `(center - r, center + r)`.
    pub fn meets_ball(&self, center: &Rational, radius: &Rational) -> bool {
        self.left < center + radius && self.right > center - radius
    }

    pub fn left_f64(&self) -> f64 {
        arith::to_f64(&self.left)
    }

    pub fn right_f64(&self) -> f64 {
        arith::to_f64(&self.right)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.left_closed { '[' } else { '(' },
            arith::Display(&self.left),
            arith::Display(&self.right),
            if self.right_closed { ']' } else { ')' }
        )
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Basic cylinder of a word together with its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub word: CfWord,
    pub interval: Interval,
}

/// Convergent data of a word that geometry needs: `p_n, q_n, p_{n-1}, q_{n-1}`
/// and the order `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergents {
    pub order: usize,
    pub p: BigInt,
    pub q: BigInt,
    pub p_prev: BigInt,
    pub q_prev: BigInt,
}

impl Convergents {
    pub fn of(word: &CfWord) -> Self {
        Convergents {
            order: word.len(),
            p: word.p_n().clone(),
            q: word.q_n().clone(),
            p_prev: word.p_prev().clone(),
            q_prev: word.q_prev().clone(),
        }
    }

    pub fn child(&self, a: u64) -> Convergents {
        let a = BigInt::from(a);
        Convergents {
            order: self.order + 1,
            p: &a * &self.p + &self.p_prev,
            q: &a * &self.q + &self.q_prev,
            p_prev: self.p.clone(),
            q_prev: self.q.clone(),
        }
    }

    /// The point `(a p_n + p_{n-1}) / (a q_n + q_{n-1})` separating children
    /// `a - 1` and `a`.
    fn child_point(&self, a: &BigInt) -> Rational {
        Rational::new(a * &self.p + &self.p_prev, a * &self.q + &self.q_prev)
    }

    pub fn cylinder(&self) -> Interval {
        let near = Rational::new(self.p.clone(), self.q.clone());
        let far = Rational::new(&self.p + &self.p_prev, &self.q + &self.q_prev);
        if self.order % 2 == 0 {
            Interval {
                left: near,
                right: far,
                left_closed: true,
                right_closed: false,
            }
        } else {
            Interval {
                left: far,
                right: near,
                left_closed: false,
                right_closed: true,
            }
        }
    }

    /// Hull of the children `a_{n+1}` in `lo..=hi`.
    pub fn children_hull(&self, lo: u64, hi: u64) -> Result<Interval, GeometryError> {
        if lo == 0 || lo > hi {
            return Err(GeometryError::EmptyRange { lo, hi });
        }
        let first = self.child_point(&BigInt::from(lo));
        let past_last = self.child_point(&(BigInt::from(hi) + 1));
        // Children have order n + 1; even order cylinders are closed on the
        // left, odd order ones on the right.
        if (self.order + 1) % 2 == 0 {
            Ok(Interval {
                left: first,
                right: past_last,
                left_closed: true,
                right_closed: false,
            })
        } else {
            Ok(Interval {
                left: past_last,
                right: first,
                left_closed: false,
                right_closed: true,
            })
        }
    }

    /// `|J|` for children `lo..=hi` without building the endpoints:
    /// `(hi + 1 - lo) / ((lo q_n + q_{n-1})((hi + 1) q_n + q_{n-1}))`.
    pub fn children_hull_length(&self, lo: u64, hi: u64) -> Rational {
        let lo_b = BigInt::from(lo);
        let end = BigInt::from(hi) + 1;
        Rational::new(
            &end - &lo_b,
            (&lo_b * &self.q + &self.q_prev) * (&end * &self.q + &self.q_prev),
        )
    }
}

pub fn cylinder(word: &CfWord) -> Cylinder {
    Cylinder {
        word: word.clone(),
        interval: Convergents::of(word).cylinder(),
    }
}

/// Children `I_{n+1}(word, a)` for `a` in `lo..=hi`, sorted left to right.
pub fn child_layout(word: &CfWord, lo: u64, hi: u64) -> Result<Vec<Cylinder>, GeometryError> {
    if lo == 0 || lo > hi {
        return Err(GeometryError::EmptyRange { lo, hi });
    }
    let mut children: Vec<Cylinder> = (lo..=hi)
        .map(|a| cylinder(&word.with(a).expect("positive quotient")))
        .collect();
    if word.len() % 2 == 0 {
        children.reverse();
    }
    Ok(children)
}

/// Hull `J_n` of the admissible children under `rule`, without a membership
/// check on `word` itself.
pub fn hull_for_rule(word: &CfWord, rule: &ChildRule) -> Result<Interval, GeometryError> {
    Convergents::of(word).children_hull(rule.lo, rule.hi)
}

/// Fundamental interval `J_n(word)` of an admissible word.
pub fn fundamental_interval<C: Construction + ?Sized>(
    word: &CfWord,
    construction: &C,
) -> Result<Interval, GeometryError> {
    if !construction.is_member(word)? {
        return Err(GeometryError::NotMember(word.to_string()));
    }
    let rule = construction.child_rule(word)?;
    hull_for_rule(word, &rule)
}

/// A quantity of the form `coeff * base^exp`, compared exactly against
/// rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBound {
    pub coeff: Rational,
    pub base: BigUint,
    pub exp: Rational,
}

impl PowerBound {
    pub fn new(coeff: Rational, base: BigUint, exp: Rational) -> Self {
        PowerBound { coeff, base, exp }
    }

    /// Ordering of the nonnegative rational `x` relative to this bound.
    pub fn cmp_value(&self, x: &Rational) -> Ordering {
        // x = xn / xd  vs  coeff * base^exp   <=>   xn vs (coeff * xd) * base^exp
        let xn = x.numer().magnitude();
        let scaled = &self.coeff * Rational::from_integer(x.denom().clone());
        if x.is_negative() {
            return Ordering::Less;
        }
        arith::cmp_scaled_pow(xn, &scaled, &self.base, &self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        (arith::ln_rational(&self.coeff) + arith::to_f64(&self.exp) * arith::ln_biguint(&self.base))
            .exp()
    }
}

/// A two-sided bracket `lower <= |J_n| <= upper` with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthBracket {
    pub label: &'static str,
    pub lower: PowerBound,
    pub upper: PowerBound,
}

impl LengthBracket {
    pub fn holds(&self, length: &Rational) -> bool {
        self.lower.cmp_value(length) != Ordering::Less
            && self.upper.cmp_value(length) != Ordering::Greater
    }
}

/// Gaps between `J_n` and its same-order neighbours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub word: CfWord,
    pub case_tag: LevelCase,
    #[serde(with = "arith::serde_rational_opt")]
    pub left_gap: Option<Rational>,
    #[serde(with = "arith::serde_rational_opt")]
    pub right_gap: Option<Rational>,
    #[serde(with = "arith::serde_rational")]
    pub min_gap: Rational,
    #[serde(with = "arith::serde_rational")]
    pub length: Rational,
    /// Lower bound the construction promises for `min_gap`, if it has one.
    #[serde(with = "arith::serde_rational_opt")]
    pub promised_lower_bound: Option<Rational>,
    #[serde(with = "arith::serde_rational")]
    pub ratio_to_length: Rational,
    /// Neighbours built on quotients the parent does not admit.
    pub virtual_neighbours: bool,
}

impl GapReport {
    pub fn bound_holds(&self) -> bool {
        self.promised_lower_bound
            .as_ref()
            .is_none_or(|bound| &self.min_gap >= bound)
    }
}

/// Exact gaps between `J_n(word)` and the fundamental intervals built on the
/// sibling quotients `a_n - 1` and `a_n + 1`.
///
/// Siblings admitted by the parent are used as they are. When the parent
/// forces a single quotient, the neighbouring quotients are used as virtual
/// siblings with their own child rule, which is how the window gap is
/// measured against the cylinder boundary.
pub fn gap_exact<C: Construction + ?Sized>(
    word: &CfWord,
    construction: &C,
) -> Result<GapReport, GeometryError> {
    let n = word.len();
    if n == 0 {
        return Err(GeometryError::EmptyWord);
    }
    let own_rule = construction.child_rule(word)?;
    if !construction.is_member(word)? {
        return Err(GeometryError::NotMember(word.to_string()));
    }
    let own = hull_for_rule(word, &own_rule)?;
    let parent = word.prefix(n - 1);
    let parent_rule = construction.child_rule(&parent)?;
    let forced = parent_rule.lo == parent_rule.hi;
    let a_n = word.a(n);

    let mut candidates = Vec::new();
    if a_n > 1 {
        candidates.push(a_n - 1);
    }
    candidates.push(a_n + 1);

    let mut left_gap: Option<Rational> = None;
    let mut right_gap: Option<Rational> = None;
    for sibling_a in candidates {
        if !forced && !parent_rule.contains(sibling_a) {
            continue;
        }
        let sibling = parent.with(sibling_a).expect("positive quotient");
        let Ok(rule) = construction.child_rule(&sibling) else {
            continue;
        };
        let Ok(hull) = hull_for_rule(&sibling, &rule) else {
            continue;
        };
        if hull.left >= own.right {
            right_gap = Some(&hull.left - &own.right);
        } else if hull.right <= own.left {
            left_gap = Some(&own.left - &hull.right);
        } else {
            return Err(GeometryError::Overlap(word.to_string()));
        }
    }

    let min_gap = match (&left_gap, &right_gap) {
        (Some(l), Some(r)) => arith::min_rational(l, r).clone(),
        (Some(g), None) | (None, Some(g)) => g.clone(),
        (None, None) => return Err(GeometryError::NoSibling(word.to_string())),
    };
    let length = own.length();
    let promised_lower_bound = construction
        .gap_factor(own_rule.case)
        .map(|factor| factor * &length);
    let ratio_to_length = &min_gap / &length;
    Ok(GapReport {
        word: word.clone(),
        case_tag: own_rule.case,
        left_gap,
        right_gap,
        min_gap,
        length,
        promised_lower_bound,
        ratio_to_length,
        virtual_neighbours: forced,
    })
}

/// `1 / (q_n (q_n + q_{n-1}))`, the length of a basic cylinder.
pub fn cylinder_length(word: &CfWord) -> Rational {
    Rational::new(
        BigInt::one(),
        word.q_n() * (word.q_n() + word.q_prev()),
    )
}
