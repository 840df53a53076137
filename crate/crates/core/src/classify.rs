//! Approximating functions and what finite expansions say about them.
//!
//! `ψ` and `Ψ` are linked by `Ψ(t) = 1/(1 - tψ(t)) - 1`. The sets involved
//! are
//!
//! * `G(Ψ)`: `a_n a_{n+1} > Ψ(q_n)` for infinitely many `n`;
//! * `K(Ψ)`: `|x - p/q| < 1/(q^2 Ψ(q))` for infinitely many `p/q`;
//! * `D(ψ)`: the `ψ`-Dirichlet improvable numbers.
//!
//! A finite word can only offer evidence for membership. Witness indices are
//! reported and never turned into a verdict about the infinite expansion.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, int, Rational};
use crate::cf::CfWord;
use crate::stats;

/// Multiplier in the sufficient condition `a_{n+1} > 3 C Ψ(q_n)` used as a
/// `K(CΨ)` witness.
pub const K_SUFFICIENT_MULTIPLIER: i64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("t psi(t) >= 1 at t = {0}")]
    Domain(String),
    #[error("invalid approximating function: {0}")]
    Invalid(String),
    #[error("exponent s = {0} must lie in (0, 1)")]
    Exponent(String),
    #[error("Psi is not non-decreasing, so its lower order does not give a dimension")]
    NotMonotone,
}

/// A real number that is either known exactly or only approximately.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => arith::to_f64(r),
            Value::Approx(v) => *v,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{}", arith::Display(r)),
            Value::Approx(v) => write!(f, "{v:.10}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Exact(r) => s.serialize_str(&arith::format_rational(r)),
            Value::Approx(v) => s.serialize_f64(*v),
        }
    }
}

/// Polynomial with rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(#[serde(with = "serde_coeffs")] pub Vec<Rational>);

mod serde_coeffs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(arith::format_rational)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "arith::serde_rational")] Rational);
        let raw = Vec::<Wrap>::deserialize(d)?;
        Ok(raw.into_iter().map(|w| w.0).collect())
    }
}

impl Poly {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn monomial(c: Rational, degree: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); degree + 1];
        coeffs[degree] = c;
        Poly::new(coeffs)
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.0.last()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.0
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.0
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + arith::to_f64(c))
    }

    /// `t * self`.
    pub fn shift(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![Rational::zero()];
        coeffs.extend(self.0.iter().cloned());
        Poly::new(coeffs)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let coeffs = (0..n)
            .map(|i| {
                let a = self.0.get(i).cloned().unwrap_or_else(Rational::zero);
                let b = other.0.get(i).cloned().unwrap_or_else(Rational::zero);
                a - b
            })
            .collect();
        Poly::new(coeffs)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let coeffs = (0..n)
            .map(|i| {
                let a = self.0.get(i).cloned().unwrap_or_else(Rational::zero);
                let b = other.0.get(i).cloned().unwrap_or_else(Rational::zero);
                a + b
            })
            .collect();
        Poly::new(coeffs)
    }
}

/// Rational function `num(t) / den(t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalFn {
    pub num: Poly,
    pub den: Poly,
}

impl RationalFn {
    pub fn new(num: Poly, den: Poly) -> Result<Self, ClassifyError> {
        if den.is_zero() {
            return Err(ClassifyError::Invalid("zero denominator".into()));
        }
        Ok(RationalFn { num, den })
    }

    pub fn eval(&self, t: &Rational) -> Option<Rational> {
        let d = self.den.eval(t);
        (!d.is_zero()).then(|| self.num.eval(t) / d)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.num.eval_f64(t) / self.den.eval_f64(t)
    }

    /// Exponent of the growth at infinity: `deg num - deg den`.
    pub fn growth_exponent(&self) -> Option<i64> {
        Some(self.num.degree()? as i64 - self.den.degree()? as i64)
    }

    /// Whether the function is eventually positive.
    pub fn eventually_positive(&self) -> bool {
        match (self.num.leading(), self.den.leading()) {
            (Some(a), Some(b)) => a.is_positive() == b.is_positive(),
            _ => false,
        }
    }
}

/// Sample points `t` at which rational functions are checked: every integer
/// up to 256 and powers of two up to `2^64`.
fn check_points() -> Vec<Rational> {
    let mut pts: Vec<Rational> = (1..=256).map(int).collect();
    pts.extend((9..=64).map(|k| Rational::from_integer(BigInt::one() << k)));
    pts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    /// `Ψ(t) = t^τ`.
    Power {
        #[serde(with = "arith::serde_rational")]
        tau: Rational,
    },
    /// `Ψ(t) = t^τ (1 + ln t)^β`.
    PowerLog {
        #[serde(with = "arith::serde_rational")]
        tau: Rational,
        #[serde(with = "arith::serde_rational")]
        beta: Rational,
    },
    /// Step function through sample points `(t, Ψ(t))` with increasing `t`:
    /// `Ψ(q)` is the value at the largest sample `t <= q`.
    Tabulated { table: Vec<TablePoint> },
    /// `Ψ` derived from a rational `ψ`.
    DerivedFromPsi { psi: RationalFn },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TablePoint {
    #[serde(with = "arith::serde_rational")]
    pub t: Rational,
    #[serde(with = "arith::serde_rational")]
    pub value: Rational,
}

/// An approximating function `Ψ` on `[1, ∞)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PsiFamily", into = "PsiFamily")]
pub struct PsiSpec {
    family: PsiFamily,
    monotone: bool,
    /// `Ψ = t ψ / (1 - t ψ)` for the derived family.
    derived: Option<RationalFn>,
}

impl TryFrom<PsiFamily> for PsiSpec {
    type Error = ClassifyError;

    fn try_from(family: PsiFamily) -> Result<Self, Self::Error> {
        PsiSpec::new(family)
    }
}

impl From<PsiSpec> for PsiFamily {
    fn from(spec: PsiSpec) -> Self {
        spec.family
    }
}

impl PsiSpec {
    pub fn new(family: PsiFamily) -> Result<Self, ClassifyError> {
        let mut derived = None;
        let monotone = match &family {
            PsiFamily::Power { tau } => !tau.is_negative(),
            PsiFamily::PowerLog { tau, beta } => {
                tau.is_positive() || (tau.is_zero() && !beta.is_negative())
            }
            PsiFamily::Tabulated { table } => {
                if table.is_empty() {
                    return Err(ClassifyError::Invalid("empty table".into()));
                }
                if table.iter().any(|p| p.t < int(1) || !p.value.is_positive()) {
                    return Err(ClassifyError::Invalid(
                        "table points need t >= 1 and a positive value".into(),
                    ));
                }
                if table.windows(2).any(|w| w[1].t <= w[0].t) {
                    return Err(ClassifyError::Invalid(
                        "table abscissae must increase".into(),
                    ));
                }
                table.windows(2).all(|w| w[1].value >= w[0].value)
            }
            PsiFamily::DerivedFromPsi { psi } => {
                let big = psi_to_big_psi(psi)?;
                let pts = check_points();
                let values: Vec<Rational> = pts
                    .iter()
                    .map(|t| big.eval(t).expect("checked positive denominator"))
                    .collect();
                let monotone = values.windows(2).all(|w| w[1] >= w[0]);
                derived = Some(big);
                monotone
            }
        };
        Ok(PsiSpec {
            family,
            monotone,
            derived,
        })
    }

    pub fn power(tau: Rational) -> Self {
        PsiSpec::new(PsiFamily::Power { tau }).expect("power family is always valid")
    }

    pub fn power_log(tau: Rational, beta: Rational) -> Self {
        PsiSpec::new(PsiFamily::PowerLog { tau, beta }).expect("power-log family is always valid")
    }

    pub fn family(&self) -> &PsiFamily {
        &self.family
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// `Ψ(t)` in floating point.
    pub fn eval_f64(&self, t: f64) -> f64 {
        match &self.family {
            PsiFamily::Power { tau } => t.powf(arith::to_f64(tau)),
            PsiFamily::PowerLog { tau, beta } => {
                t.powf(arith::to_f64(tau)) * (1.0 + t.ln()).powf(arith::to_f64(beta))
            }
            PsiFamily::Tabulated { table } => arith::to_f64(&step_value(table, &|p| {
                arith::to_f64(&p.t) <= t
            })),
            PsiFamily::DerivedFromPsi { .. } => self.derived.as_ref().expect("set").eval_f64(t),
        }
    }

    /// `Ψ(t)` exactly, when it is rational.
    pub fn eval_exact(&self, t: &Rational) -> Option<Rational> {
        match &self.family {
            PsiFamily::Power { tau } if tau.is_integer() => {
                let e = tau.to_integer().to_i32()?;
                Some(num_traits::pow::Pow::pow(t, e))
            }
            PsiFamily::PowerLog { tau, beta } if beta.is_zero() && tau.is_integer() => {
                let e = tau.to_integer().to_i32()?;
                Some(num_traits::pow::Pow::pow(t, e))
            }
            PsiFamily::Tabulated { table } => Some(step_value(table, &|p| &p.t <= t)),
            PsiFamily::DerivedFromPsi { .. } => self.derived.as_ref().expect("set").eval(t),
            _ => None,
        }
    }

    /// Ordering of `lhs` against `c Ψ(q)`, exact except for logarithmic
    /// factors.
    pub fn compare_scaled(&self, lhs: &Rational, c: &Rational, q: &BigUint) -> Ordering {
        if !c.is_positive() {
            return lhs.cmp(&Rational::zero());
        }
        match &self.family {
            PsiFamily::Power { tau } => {
                if lhs.is_negative() {
                    return Ordering::Less;
                }
                // lhs = n/d  vs  c q^τ   <=>   n vs (c d) q^τ
                let scaled = c * Rational::from_integer(lhs.denom().clone());
                arith::cmp_scaled_pow(lhs.numer().magnitude(), &scaled, q, tau)
            }
            PsiFamily::PowerLog { tau, beta } if beta.is_zero() => {
                PsiSpec::power(tau.clone()).compare_scaled(lhs, c, q)
            }
            PsiFamily::PowerLog { tau, beta } => {
                let lq = arith::ln_biguint(q);
                let rhs = arith::ln_rational(c)
                    + arith::to_f64(tau) * lq
                    + arith::to_f64(beta) * (1.0 + lq).ln();
                if lhs.is_zero() {
                    return Ordering::Less;
                }
                arith::ln_rational(lhs)
                    .partial_cmp(&rhs)
                    .unwrap_or(Ordering::Equal)
            }
            _ => {
                let value = self
                    .eval_exact(&arith::from_biguint(q))
                    .expect("exact family");
                lhs.cmp(&(c * value))
            }
        }
    }
}

fn step_value(table: &[TablePoint], le: &dyn Fn(&TablePoint) -> bool) -> Rational {
    let idx = table.iter().take_while(|p| le(p)).count();
    table[idx.saturating_sub(1)].value.clone()
}

/// `Ψ = tψ / (1 - tψ)` as a rational function, checking `tψ(t) < 1` at the
/// sample points and at infinity.
fn psi_to_big_psi(psi: &RationalFn) -> Result<RationalFn, ClassifyError> {
    let t_num = psi.num.shift();
    let gap = psi.den.sub(&t_num);
    if gap.is_zero() {
        return Err(ClassifyError::Domain("every t".into()));
    }
    for t in check_points() {
        let d = psi.den.eval(&t);
        if d.is_zero() {
            return Err(ClassifyError::Domain(arith::format_rational(&t)));
        }
        let t_psi = &t * psi.num.eval(&t) / d;
        if t_psi >= int(1) {
            return Err(ClassifyError::Domain(arith::format_rational(&t)));
        }
        if !t_psi.is_positive() {
            return Err(ClassifyError::Invalid(format!(
                "psi must be positive, fails at t = {}",
                arith::format_rational(&t)
            )));
        }
    }
    let big = RationalFn::new(t_num, gap)?;
    if !big.eventually_positive() {
        return Err(ClassifyError::Domain("large t".into()));
    }
    Ok(big)
}

/// Derives `Ψ` from `ψ`.
pub fn psi_to_big_psi_spec(psi: RationalFn) -> Result<PsiSpec, ClassifyError> {
    PsiSpec::new(PsiFamily::DerivedFromPsi { psi })
}

/// `ψ(t) = Ψ(t) / (t (1 + Ψ(t)))`, the inverse of the relation above.
pub fn big_psi_to_psi(big_psi: &Rational, t: &Rational) -> Rational {
    big_psi / (t * (int(1) + big_psi))
}

/// Lower order `τ = liminf log Ψ(q) / log q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LowerOrder {
    Exact {
        #[serde(with = "arith::serde_rational")]
        value: Rational,
    },
    /// Minimum of `log Ψ(t) / log t` over the last `window` sample points.
    Estimate { value: f64, window: usize },
    Infinite,
}

impl LowerOrder {
    pub fn to_f64(&self) -> f64 {
        match self {
            LowerOrder::Exact { value } => arith::to_f64(value),
            LowerOrder::Estimate { value, .. } => *value,
            LowerOrder::Infinite => f64::INFINITY,
        }
    }
}

/// Fraction of a table used for the tail estimate of `τ`.
const TAIL_FRACTION: f64 = 0.5;

pub fn lower_order_tau(spec: &PsiSpec) -> LowerOrder {
    match &spec.family {
        PsiFamily::Power { tau } | PsiFamily::PowerLog { tau, .. } => LowerOrder::Exact {
            value: tau.clone(),
        },
        PsiFamily::DerivedFromPsi { .. } => {
            let big = spec.derived.as_ref().expect("set");
            LowerOrder::Exact {
                value: int(big.growth_exponent().expect("nonzero numerator")),
            }
        }
        PsiFamily::Tabulated { table } => {
            let usable: Vec<&TablePoint> = table.iter().filter(|p| p.t > int(1)).collect();
            if usable.is_empty() {
                return LowerOrder::Estimate {
                    value: 0.0,
                    window: 0,
                };
            }
            let window = ((usable.len() as f64 * TAIL_FRACTION).ceil() as usize).max(1);
            let value = usable[usable.len() - window..]
                .iter()
                .map(|p| arith::ln_rational(&p.value) / arith::ln_rational(&p.t))
                .fold(f64::INFINITY, f64::min);
            LowerOrder::Estimate { value, window }
        }
    }
}

/// `2/(τ + 2)`, with `0` for infinite `τ`.
pub fn dimension_formula(spec: &PsiSpec) -> Result<Value, ClassifyError> {
    dimension_for_order(&lower_order_tau(spec))
}

pub fn dimension_for_order(order: &LowerOrder) -> Result<Value, ClassifyError> {
    match order {
        LowerOrder::Exact { value } => {
            if value.is_negative() {
                return Err(ClassifyError::NotMonotone);
            }
            Ok(Value::Exact(int(2) / (value + int(2))))
        }
        LowerOrder::Estimate { value, .. } => {
            if *value < 0.0 {
                return Err(ClassifyError::NotMonotone);
            }
            Ok(Value::Approx(2.0 / (value + 2.0)))
        }
        LowerOrder::Infinite => Ok(Value::Exact(Rational::zero())),
    }
}

// --- Membership evidence -------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DStatus {
    ImprovableEvidence,
    NonImprovableEvidence,
    Indeterminate,
}

impl fmt::Display for DStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DStatus::ImprovableEvidence => "improvable-evidence",
            DStatus::NonImprovableEvidence => "non-improvable-evidence",
            DStatus::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceReport {
    pub depth: usize,
    /// `n` with `a_n a_{n+1} > C Ψ(q_n)`.
    pub g_witnesses: Vec<usize>,
    /// `n` with `a_{n+1} > 3 C Ψ(q_n)`.
    pub k_witnesses: Vec<usize>,
    pub d_status: DStatus,
    /// First `n` past the threshold with `Ψ(q_n)/4 < a_n a_{n+1} <= Ψ(q_n)`.
    pub first_undetermined: Option<usize>,
    pub threshold: usize,
}

/// Evidence with the "sufficiently large" threshold at half the depth.
pub fn membership_evidence(word: &CfWord, spec: &PsiSpec, c: &Rational) -> EvidenceReport {
    membership_evidence_with(word, spec, c, word.len() / 2)
}

pub fn membership_evidence_with(
    word: &CfWord,
    spec: &PsiSpec,
    c: &Rational,
    threshold: usize,
) -> EvidenceReport {
    let depth = word.len();
    let k_c = c * int(K_SUFFICIENT_MULTIPLIER);
    let quarter = arith::ratio(1, 4);
    let mut g = Vec::new();
    let mut k = Vec::new();
    let mut exceeds_psi = false;
    let mut all_small = true;
    let mut first_undetermined = None;
    for n in 1..depth {
        let q = word.q_n_unsigned_at(n);
        let next = Rational::from_integer(BigInt::from(word.a(n + 1)));
        let product = Rational::from_integer(BigInt::from(word.a(n)) * BigInt::from(word.a(n + 1)));
        if spec.compare_scaled(&product, c, &q) == Ordering::Greater {
            g.push(n);
        }
        if spec.compare_scaled(&next, &k_c, &q) == Ordering::Greater {
            k.push(n);
        }
        let above = spec.compare_scaled(&product, &int(1), &q) == Ordering::Greater;
        exceeds_psi |= above;
        if n >= threshold {
            let small = spec.compare_scaled(&product, &quarter, &q) != Ordering::Greater;
            if !small {
                all_small = false;
                if !above && first_undetermined.is_none() {
                    first_undetermined = Some(n);
                }
            }
        }
    }
    let checked_any = depth > threshold.max(1);
    let d_status = if exceeds_psi {
        DStatus::NonImprovableEvidence
    } else if all_small && checked_any {
        DStatus::ImprovableEvidence
    } else {
        DStatus::Indeterminate
    };
    EvidenceReport {
        depth,
        g_witnesses: g,
        k_witnesses: k,
        d_status,
        first_undetermined,
        threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionViolation {
    pub word: CfWord,
    pub rule: &'static str,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub words: usize,
    pub violations: Vec<InclusionViolation>,
}

impl InclusionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the chain `K(3Ψ) ⊂ G(Ψ) ⊂ D(ψ)^c ⊂ G(Ψ/4)` as inclusions between
/// witness sets of each word.
pub fn inclusion_audit(words: &[CfWord], spec: &PsiSpec) -> InclusionReport {
    let one = int(1);
    let quarter = arith::ratio(1, 4);
    let mut violations = Vec::new();
    for word in words {
        let e = membership_evidence(word, spec, &one);
        let loose = membership_evidence(word, spec, &quarter);
        for &n in &e.k_witnesses {
            if !e.g_witnesses.contains(&n) {
                violations.push(InclusionViolation {
                    word: word.clone(),
                    rule: "K(3 Psi) witness without G(Psi) witness",
                    index: Some(n),
                });
            }
        }
        if !e.g_witnesses.is_empty() && e.d_status == DStatus::ImprovableEvidence {
            violations.push(InclusionViolation {
                word: word.clone(),
                rule: "G(Psi) witness with improvable evidence",
                index: e.g_witnesses.first().copied(),
            });
        }
        if e.d_status == DStatus::NonImprovableEvidence && loose.g_witnesses.is_empty() {
            violations.push(InclusionViolation {
                word: word.clone(),
                rule: "non-improvable evidence without G(Psi/4) witness",
                index: None,
            });
        }
        for &n in &e.g_witnesses {
            if !loose.g_witnesses.contains(&n) {
                violations.push(InclusionViolation {
                    word: word.clone(),
                    rule: "G(Psi) witness without G(Psi/4) witness",
                    index: Some(n),
                });
            }
        }
    }
    InclusionReport {
        words: words.len(),
        violations,
    }
}

// --- Series classification -----------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMethod {
    ExponentComparison,
    PartialSumHeuristic,
}

/// Behaviour of `Σ_t t (1/(t^2 Ψ(t)))^s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesVerdict {
    #[serde(with = "arith::serde_rational")]
    pub s: Rational,
    pub verdict: Verdict,
    pub method: SeriesMethod,
    /// `2/(2+τ)`, the exponent at which the verdict flips.
    pub critical_s: Option<Value>,
}

/// Margin on the fitted term exponent before the heuristic commits.
const HEURISTIC_MARGIN: f64 = 0.1;

pub fn series_classify(spec: &PsiSpec, s: &Rational) -> Result<SeriesVerdict, ClassifyError> {
    if !s.is_positive() || s >= &int(1) {
        return Err(ClassifyError::Exponent(arith::format_rational(s)));
    }
    let exact_tau = |tau: &Rational| int(2) / (tau + int(2));
    let verdict = |converges: bool| {
        if converges {
            Verdict::Converges
        } else {
            Verdict::Diverges
        }
    };
    match &spec.family {
        PsiFamily::Power { tau } => {
            let critical = exact_tau(tau);
            Ok(SeriesVerdict {
                s: s.clone(),
                verdict: verdict(s > &critical),
                method: SeriesMethod::ExponentComparison,
                critical_s: Some(Value::Exact(critical)),
            })
        }
        PsiFamily::DerivedFromPsi { .. } => {
            let tau = match lower_order_tau(spec) {
                LowerOrder::Exact { value } => value,
                _ => unreachable!("derived families have exact order"),
            };
            if tau.is_negative() {
                return Err(ClassifyError::NotMonotone);
            }
            let critical = exact_tau(&tau);
            Ok(SeriesVerdict {
                s: s.clone(),
                verdict: verdict(s > &critical),
                method: SeriesMethod::ExponentComparison,
                critical_s: Some(Value::Exact(critical)),
            })
        }
        PsiFamily::PowerLog { tau, beta } => {
            // Term t^{1-(2+τ)s} (1 + ln t)^{-βs}: the power decides unless it
            // is exactly -1, where the log factor needs βs > 1.
            let critical = exact_tau(tau);
            let converges = match s.cmp(&critical) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => beta * s > int(1),
            };
            Ok(SeriesVerdict {
                s: s.clone(),
                verdict: verdict(converges),
                method: SeriesMethod::ExponentComparison,
                critical_s: Some(Value::Exact(critical)),
            })
        }
        PsiFamily::Tabulated { table } => {
            let sf = arith::to_f64(s);
            let pts: Vec<(f64, f64)> = table
                .iter()
                .filter(|p| p.t > int(1))
                .map(|p| {
                    let lt = arith::ln_rational(&p.t);
                    let term = lt - sf * (2.0 * lt + arith::ln_rational(&p.value));
                    (lt, term)
                })
                .collect();
            let tail = &pts[pts.len() / 2..];
            let (xs, ys): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
            let v = match stats::fit_line(&xs, &ys) {
                Some(fit) if fit.slope < -1.0 - HEURISTIC_MARGIN => Verdict::Converges,
                Some(fit) if fit.slope > -1.0 + HEURISTIC_MARGIN => Verdict::Diverges,
                _ => Verdict::Unknown,
            };
            let critical = dimension_for_order(&lower_order_tau(spec)).ok();
            Ok(SeriesVerdict {
                s: s.clone(),
                verdict: v,
                method: SeriesMethod::PartialSumHeuristic,
                critical_s: critical,
            })
        }
    }
}

trait QAt {
    fn q_n_unsigned_at(&self, n: usize) -> BigUint;
}

impl QAt for CfWord {
    fn q_n_unsigned_at(&self, n: usize) -> BigUint {
        self.q(n as isize).magnitude().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ratio;

    fn w(q: &[u64]) -> CfWord {
        CfWord::from_quotients(q)
    }

    fn poly(c: &[i64]) -> Poly {
        Poly::new(c.iter().map(|&x| int(x)).collect())
    }

    #[test]
    fn psi_relation_examples() {
        // ψ = 1/(2t)  =>  Ψ ≡ 1
        let spec = psi_to_big_psi_spec(RationalFn::new(poly(&[1]), poly(&[0, 2])).unwrap()).unwrap();
        for t in [1, 2, 7, 1000] {
            assert_eq!(spec.eval_exact(&int(t)), Some(int(1)));
        }
        assert_eq!(lower_order_tau(&spec), LowerOrder::Exact { value: int(0) });
        // ψ = 1/(t(t+1))  =>  Ψ = 1/t
        let spec =
            psi_to_big_psi_spec(RationalFn::new(poly(&[1]), poly(&[0, 1, 1])).unwrap()).unwrap();
        for t in [1, 3, 10] {
            assert_eq!(spec.eval_exact(&int(t)), Some(ratio(1, t)));
        }
        assert!(!spec.is_monotone());
        // ψ = 1/t is outside the domain.
        let err = psi_to_big_psi_spec(RationalFn::new(poly(&[1]), poly(&[0, 1])).unwrap());
        assert!(matches!(err, Err(ClassifyError::Domain(_))));
    }

    #[test]
    fn inverse_relation_recovers_psi() {
        let psi = RationalFn::new(poly(&[1]), poly(&[0, 3, 1])).unwrap();
        let spec = psi_to_big_psi_spec(psi.clone()).unwrap();
        for t in [1, 2, 5, 17, 400] {
            let t = int(t);
            let big = spec.eval_exact(&t).unwrap();
            assert_eq!(big_psi_to_psi(&big, &t), psi.eval(&t).unwrap());
        }
    }

    #[test]
    fn lower_orders() {
        assert_eq!(lower_order_tau(&PsiSpec::power(int(1))), LowerOrder::Exact { value: int(1) });
        assert_eq!(
            lower_order_tau(&PsiSpec::power_log(int(2), int(5))),
            LowerOrder::Exact { value: int(2) }
        );
        let table = (1..=60)
            .map(|k| {
                let t = Rational::from_integer(BigInt::one() << k);
                TablePoint {
                    t: t.clone(),
                    value: t,
                }
            })
            .collect();
        let spec = PsiSpec::new(PsiFamily::Tabulated { table }).unwrap();
        match lower_order_tau(&spec) {
            LowerOrder::Estimate { value, window } => {
                assert!((value - 1.0).abs() < 0.01);
                assert_eq!(window, 30);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_formula_values() {
        let d = |tau| dimension_formula(&PsiSpec::power(tau)).unwrap();
        assert_eq!(d(int(1)), Value::Exact(ratio(2, 3)));
        assert_eq!(d(int(0)), Value::Exact(int(1)));
        assert_eq!(d(int(2)), Value::Exact(ratio(1, 2)));
        assert_eq!(dimension_for_order(&LowerOrder::Infinite).unwrap(), Value::Exact(int(0)));
    }

    #[test]
    fn evidence_examples() {
        let spec = PsiSpec::power(int(1));
        let e = membership_evidence(&w(&[1, 1, 4, 4]), &spec, &int(1));
        assert!(e.g_witnesses.contains(&3));
        assert!(!e.k_witnesses.contains(&3));
        assert_eq!(e.d_status, DStatus::NonImprovableEvidence);

        let ones = w(&[1; 12]);
        let e = membership_evidence(&ones, &spec, &int(1));
        assert!(e.g_witnesses.iter().all(|&n| n < 2));
        assert!(e.k_witnesses.is_empty());

        let flat = PsiSpec::power(int(0));
        let e = membership_evidence(&w(&[1, 100]), &flat, &int(1));
        assert_eq!(e.g_witnesses, vec![1]);
        assert_eq!(e.k_witnesses, vec![1]);
    }

    #[test]
    fn improvable_evidence_needs_small_products() {
        let spec = PsiSpec::power(int(1));
        let e = membership_evidence(&w(&[1; 20]), &spec, &int(1));
        // q_n grows like the Fibonacci numbers, so products 1 fall below q_n/4
        // past the threshold.
        assert_eq!(e.d_status, DStatus::ImprovableEvidence);
    }

    #[test]
    fn series_examples() {
        let spec = PsiSpec::power(int(1));
        let v = |s| series_classify(&spec, &s).unwrap().verdict;
        assert_eq!(v(ratio(1, 2)), Verdict::Diverges);
        assert_eq!(v(ratio(7, 10)), Verdict::Converges);
        assert_eq!(v(ratio(2, 3)), Verdict::Diverges);
        assert!(series_classify(&spec, &int(1)).is_err());
        let pl = PsiSpec::power_log(int(1), int(3));
        assert_eq!(series_classify(&pl, &ratio(2, 3)).unwrap().verdict, Verdict::Converges);
        let pl = PsiSpec::power_log(int(1), int(1));
        assert_eq!(series_classify(&pl, &ratio(2, 3)).unwrap().verdict, Verdict::Diverges);
    }

    #[test]
    fn json_form() {
        let spec: PsiSpec = serde_json::from_str(r#"{"family":"power","tau":"1/2"}"#).unwrap();
        assert_eq!(lower_order_tau(&spec), LowerOrder::Exact { value: ratio(1, 2) });
        let spec: PsiSpec =
            serde_json::from_str(r#"{"family":"power_log","tau":2,"beta":5}"#).unwrap();
        assert_eq!(spec, PsiSpec::power_log(int(2), int(5)));
        let spec: PsiSpec = serde_json::from_str(
            r#"{"family":"tabulated","table":[{"t":1,"value":1},{"t":10,"value":10}]}"#,
        )
        .unwrap();
        assert!(spec.is_monotone());
        let back: PsiSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let derived: PsiSpec = serde_json::from_str(
            r#"{"family":"derived_from_psi","psi":{"num":[1],"den":[0,2]}}"#,
        )
        .unwrap();
        assert_eq!(derived.eval_exact(&int(5)), Some(int(1)));
    }
}
