//! The pressure equation and the mass distribution it induces on `E_M`.
//!
//! `S = S(L, M, τ)` is the root of
//! `Σ_{(a_1..a_L) ∈ [1,M]^L} q_L(a_1..a_L)^{-(2+τ)s} = 1`. Denominators are
//! exact integers; the powers are evaluated in `f64` with compensated
//! summation.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{self, Rational};
use crate::cantor::{CantorSchedule, ConstructionError, LevelTree};
use crate::stats::{compensated_sum, NeumaierSum};

/// Default cap on the number of words `M^L` in one pressure sum.
pub const DEFAULT_TERM_BUDGET: u64 = 20_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pressure sum has {terms} terms, more than the budget {budget}")]
    Explosion { terms: u128, budget: u64 },
    #[error("no root: the sum at s = 0 is {0}, not above 1")]
    NoRoot(f64),
    #[error("bisection stopped with residual {residual:e} above tolerance {tol:e}")]
    NotConverged { residual: f64, tol: f64 },
    #[error("solution is for (L, M, tau) = ({0}), not the schedule's ({1})")]
    MissingSolution(String, String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Words of `[1, M]^L` grouped by their denominator `q_L`.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    block_len: usize,
    cap: u64,
    /// `(q_L, multiplicity)`, increasing in `q_L`.
    groups: Vec<(u64, u64)>,
}

impl BlockSpectrum {
    pub fn new(block_len: usize, cap: u64, budget: u64) -> Result<Self, PressureError> {
        validate(block_len, cap)?;
        let terms = (cap as u128).checked_pow(block_len as u32).unwrap_or(u128::MAX);
        if terms > budget as u128 {
            return Err(PressureError::Explosion { terms, budget });
        }
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for_each_block(block_len, cap, |_, q| *counts.entry(q).or_default() += 1);
        Ok(BlockSpectrum {
            block_len,
            cap,
            groups: counts.into_iter().collect(),
        })
    }

    pub fn groups(&self) -> &[(u64, u64)] {
        &self.groups
    }

    /// `Σ q_L^{-(2+τ)s}`.
    pub fn sum(&self, tau: f64, s: f64) -> f64 {
        let e = (2.0 + tau) * s;
        compensated_sum(
            self.groups
                .iter()
                .map(|&(q, count)| count as f64 * (-(e) * (q as f64).ln()).exp()),
        )
    }
}

fn validate(block_len: usize, cap: u64) -> Result<(), PressureError> {
    if block_len < 2 {
        return Err(PressureError::InvalidParameter(format!(
            "L must be at least 2, got {block_len}"
        )));
    }
    if cap < 2 {
        return Err(PressureError::InvalidParameter(format!(
            "M must be at least 2, got {cap}"
        )));
    }
    Ok(())
}

/// Visits every block word in lexicographic order with its `q_L`.
/// The word is passed as a mixed-radix code `Σ (a_i - 1) M^{L-i}`.
fn for_each_block(block_len: usize, cap: u64, mut f: impl FnMut(usize, u64)) {
    fn rec(
        depth: usize,
        block_len: usize,
        cap: u64,
        code: usize,
        q: u64,
        q_prev: u64,
        f: &mut dyn FnMut(usize, u64),
    ) {
        if depth == block_len {
            f(code, q);
            return;
        }
        for a in 1..=cap {
            rec(
                depth + 1,
                block_len,
                cap,
                code * cap as usize + (a - 1) as usize,
                a * q + q_prev,
                q,
                f,
            );
        }
    }
    rec(0, block_len, cap, 0, 1, 0, &mut f);
}

/// `Σ_{[1,M]^L} (1/q_L^{2+τ})^s`.
pub fn pressure_sum(block_len: usize, cap: u64, tau: &Rational, s: f64) -> Result<f64, PressureError> {
    if s < 0.0 {
        return Err(PressureError::InvalidParameter("s must be nonnegative".into()));
    }
    let spectrum = BlockSpectrum::new(block_len, cap, DEFAULT_TERM_BUDGET)?;
    Ok(spectrum.sum(arith::to_f64(tau), s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureSolution {
    #[serde(rename = "L")]
    pub block_len: usize,
    #[serde(rename = "M")]
    pub cap: u64,
    #[serde(with = "arith::serde_rational")]
    pub tau: Rational,
    #[serde(rename = "S")]
    pub s: f64,
    /// `sum(lo) >= 1 >= sum(hi)`.
    pub bracket: (f64, f64),
    pub residual: f64,
    pub evaluations: usize,
}

impl PressureSolution {
    /// `2/(2+τ)`, the limit of `S` as `L, M` grow.
    pub fn limit(&self) -> f64 {
        2.0 / (2.0 + arith::to_f64(&self.tau))
    }

    /// Interval Hölder exponent `S - 10/L`.
    pub fn holder_target(&self) -> f64 {
        self.s - 10.0 / self.block_len as f64
    }
}

/// Default residual tolerance for [`solve_s`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Bisection for the root of the pressure equation.
///
/// The bracket is halved until it no longer shrinks in `f64`, so the result
/// is as accurate as the sum itself; `tol` is then checked on the residual.
pub fn solve_s(block_len: usize, cap: u64, tau: &Rational, tol: f64) -> Result<PressureSolution, PressureError> {
    let spectrum = BlockSpectrum::new(block_len, cap, DEFAULT_TERM_BUDGET)?;
    solve_with(&spectrum, tau, tol)
}

pub fn solve_with(spectrum: &BlockSpectrum, tau: &Rational, tol: f64) -> Result<PressureSolution, PressureError> {
    let t = arith::to_f64(tau);
    let mut evaluations = 0usize;
    let mut eval = |s: f64| {
        evaluations += 1;
        spectrum.sum(t, s)
    };
    let at_zero = eval(0.0);
    if at_zero <= 1.0 {
        return Err(PressureError::NoRoot(at_zero));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while eval(hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(PressureError::NoRoot(at_zero));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = ((eval(lo) - 1.0).abs(), (eval(hi) - 1.0).abs());
    let (s, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
    if residual > tol {
        return Err(PressureError::NotConverged { residual, tol });
    }
    Ok(PressureSolution {
        block_len: spectrum.block_len,
        cap: spectrum.cap,
        tau: tau.clone(),
        s,
        bracket: (lo, hi),
        residual,
        evaluations,
    })
}

// --- Measure ---------------------------------------------------------------

/// Role of a level in the mass assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelRole {
    Root,
    /// `n = n_k + iL`.
    BlockBoundary,
    /// `n = n_{k+1} - 2`.
    WindowMinus2,
    /// `n = n_{k+1} - 1`.
    WindowMinus1,
    /// `n = n_{k+1}`.
    Window,
    Intermediate,
}

impl fmt::Display for LevelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelRole::Root => "root",
            LevelRole::BlockBoundary => "block-boundary",
            LevelRole::WindowMinus2 => "window-2",
            LevelRole::WindowMinus1 => "window-1",
            LevelRole::Window => "window-0",
            LevelRole::Intermediate => "intermediate",
        })
    }
}

/// How a window level splits its parent's mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSplit {
    /// Divide by the number of admissible children.
    #[default]
    ActualCount,
    /// Divide by `q_{n-1}^τ / 4`, which does not conserve mass exactly.
    QuarterPower,
}

pub fn level_role(schedule: &CantorSchedule, n: usize) -> LevelRole {
    if n == 0 {
        return LevelRole::Root;
    }
    let windows = schedule.windows();
    if windows.contains(&n) {
        LevelRole::Window
    } else if windows.contains(&(n + 1)) {
        LevelRole::WindowMinus1
    } else if windows.contains(&(n + 2)) {
        LevelRole::WindowMinus2
    } else {
        let (_, start) = schedule.stretch_start(n);
        if (n - start) % schedule.block_len() == 0 {
            LevelRole::BlockBoundary
        } else {
            LevelRole::Intermediate
        }
    }
}

/// Partial block weights: `partial[r][code]` is the sum of `w(b)` over all
/// blocks `b` extending the length-`r` prefix with the given code, where
/// `w(b) = q_L(b)^{-(2+τ)S}`. `partial[L]` holds the weights themselves.
#[derive(Debug, Clone)]
struct PartialWeights {
    cap: usize,
    partial: Vec<Vec<f64>>,
}

impl PartialWeights {
    fn new(block_len: usize, cap: u64, tau: f64, s: f64) -> Self {
        let e = (2.0 + tau) * s;
        let size = (cap as usize).pow(block_len as u32);
        let mut full = vec![0.0; size];
        for_each_block(block_len, cap, |code, q| {
            full[code] = (-e * (q as f64).ln()).exp();
        });
        let mut partial = vec![full];
        for _ in 0..block_len {
            let finer = partial.last().expect("nonempty");
            let coarser: Vec<f64> = finer
                .chunks(cap as usize)
                .map(|c| compensated_sum(c.iter().copied()))
                .collect();
            partial.push(coarser);
        }
        partial.reverse();
        PartialWeights {
            cap: cap as usize,
            partial,
        }
    }

    fn get(&self, r: usize, code: usize) -> f64 {
        self.partial[r][code]
    }

    fn total(&self) -> f64 {
        self.partial[0][0]
    }
}

/// `μ` on the fundamental intervals of a materialized schedule.
#[derive(Debug, Clone)]
pub struct MeasureTree {
    schedule: CantorSchedule,
    solution: PressureSolution,
    split: WindowSplit,
    tree: LevelTree,
    masses: Vec<Vec<f64>>,
    roles: Vec<LevelRole>,
}

impl MeasureTree {
    pub fn schedule(&self) -> &CantorSchedule {
        &self.schedule
    }

    pub fn solution(&self) -> &PressureSolution {
        &self.solution
    }

    pub fn split(&self) -> WindowSplit {
        self.split
    }

    pub fn tree(&self) -> &LevelTree {
        &self.tree
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn masses(&self, n: usize) -> &[f64] {
        &self.masses[n]
    }

    pub fn mass(&self, n: usize, idx: usize) -> f64 {
        self.masses[n][idx]
    }

    pub fn role(&self, n: usize) -> LevelRole {
        self.roles[n]
    }

    pub fn roles(&self) -> &[LevelRole] {
        &self.roles
    }
}

/// Materializes levels `0..=max_level` and assigns `μ` to every node.
pub fn assign_measure(
    schedule: &CantorSchedule,
    solution: &PressureSolution,
    max_level: usize,
    node_budget: usize,
) -> Result<MeasureTree, PressureError> {
    assign_measure_with(schedule, solution, max_level, node_budget, WindowSplit::ActualCount)
}

pub fn assign_measure_with(
    schedule: &CantorSchedule,
    solution: &PressureSolution,
    max_level: usize,
    node_budget: usize,
    split: WindowSplit,
) -> Result<MeasureTree, PressureError> {
    if solution.block_len != schedule.block_len()
        || solution.cap != schedule.cap()
        || &solution.tau != schedule.tau()
    {
        return Err(PressureError::MissingSolution(
            format!(
                "{}, {}, {}",
                solution.block_len,
                solution.cap,
                arith::format_rational(&solution.tau)
            ),
            format!(
                "{}, {}, {}",
                schedule.block_len(),
                schedule.cap(),
                arith::format_rational(schedule.tau())
            ),
        ));
    }
    let tree = LevelTree::build(schedule, max_level, node_budget)?;
    let tau = arith::to_f64(schedule.tau());
    let weights = PartialWeights::new(schedule.block_len(), schedule.cap(), tau, solution.s);
    let block_len = schedule.block_len();

    let roles: Vec<LevelRole> = (0..=max_level).map(|n| level_role(schedule, n)).collect();
    let mut masses = vec![vec![1.0]];
    // Per node of the current level: mass at the start of its block and the
    // code of the quotients since then.
    let mut base = vec![1.0f64];
    let mut code = vec![0usize];
    for n in 1..=max_level {
        let nodes = tree.level(n);
        let parent_masses = &masses[n - 1];
        let mut level_mass = Vec::with_capacity(nodes.len());
        let mut next_base = Vec::with_capacity(nodes.len());
        let mut next_code = Vec::with_capacity(nodes.len());
        match roles[n] {
            LevelRole::Window => {
                for node in nodes {
                    let parent = tree.node(n - 1, node.parent);
                    let divisor = match split {
                        WindowSplit::ActualCount => parent.rule.count() as f64,
                        WindowSplit::QuarterPower => {
                            0.25 * (tau * arith::ln_bigint(&parent.conv.q)).exp()
                        }
                    };
                    let m = parent_masses[node.parent] / divisor;
                    level_mass.push(m);
                    next_base.push(m);
                    next_code.push(0);
                }
            }
            LevelRole::WindowMinus1 => {
                for node in nodes {
                    let m = parent_masses[node.parent];
                    level_mass.push(m);
                    next_base.push(m);
                    next_code.push(0);
                }
            }
            _ => {
                let (_, start) = schedule.stretch_start(n);
                let r = (n - start - 1) % block_len + 1;
                for node in nodes {
                    let p = node.parent;
                    let (b, c) = if r == 1 {
                        (parent_masses[p], 0)
                    } else {
                        (base[p], code[p])
                    };
                    let c = c * weights.cap + (node.quotient - 1) as usize;
                    let m = b * weights.get(r, c);
                    level_mass.push(m);
                    if r == block_len {
                        next_base.push(m);
                        next_code.push(0);
                    } else {
                        next_base.push(b);
                        next_code.push(c);
                    }
                }
            }
        }
        masses.push(level_mass);
        base = next_base;
        code = next_code;
    }
    debug_assert!((weights.total() - 1.0).abs() < 1e-6);
    Ok(MeasureTree {
        schedule: schedule.clone(),
        solution: solution.clone(),
        split,
        tree,
        masses,
        roles,
    })
}

/// Tolerance on the total mass of a level.
pub const LEVEL_SUM_TOL: f64 = 1e-9;
/// Tolerance on `|μ(parent) - Σ μ(children)|`.
pub const PARENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub level: usize,
    pub role: LevelRole,
    pub nodes: usize,
    pub total: f64,
    pub total_error: f64,
    /// Largest `|μ(parent) - Σ μ(children)|` against level `level - 1`.
    pub max_parent_error: f64,
    pub min_mass: f64,
    pub passed: bool,
}

pub fn normalization_audit(measure: &MeasureTree, level: usize) -> NormalizationReport {
    let masses = measure.masses(level);
    let total = compensated_sum(masses.iter().copied());
    let mut max_parent_error: f64 = 0.0;
    if level >= 1 {
        let tree = measure.tree();
        for (idx, parent) in tree.level(level - 1).iter().enumerate() {
            let sum: NeumaierSum = masses[parent.children.clone()].iter().copied().collect();
            let err = (sum.value() - measure.mass(level - 1, idx)).abs();
            max_parent_error = max_parent_error.max(err);
        }
    }
    let total_error = (total - 1.0).abs();
    let min_mass = masses.iter().copied().fold(f64::INFINITY, f64::min);
    NormalizationReport {
        level,
        role: measure.role(level),
        nodes: masses.len(),
        total,
        total_error,
        max_parent_error,
        min_mass,
        passed: total_error <= LEVEL_SUM_TOL && max_parent_error <= PARENT_TOL && min_mass >= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;

    #[test]
    fn hand_sums() {
        let v = pressure_sum(2, 2, &int(0), 1.0).unwrap();
        let expected = 1.0 / 4.0 + 2.0 / 9.0 + 1.0 / 25.0;
        assert!((v - expected).abs() < 1e-15);
        assert_eq!(pressure_sum(2, 2, &int(0), 0.0).unwrap(), 4.0);
        assert!(pressure_sum(2, 3, &int(1), 0.5).unwrap() > pressure_sum(2, 3, &int(1), 0.7).unwrap());
    }

    #[test]
    fn rejects_degenerate_blocks() {
        assert!(matches!(pressure_sum(1, 2, &int(0), 1.0), Err(PressureError::InvalidParameter(_))));
        assert!(matches!(solve_s(2, 1, &int(0), 1e-10), Err(PressureError::InvalidParameter(_))));
        assert!(matches!(
            BlockSpectrum::new(10, 100, 1000),
            Err(PressureError::Explosion { .. })
        ));
    }

    #[test]
    fn solves_small_case() {
        let sol = solve_s(2, 2, &int(0), 1e-10).unwrap();
        assert!(sol.s > 0.65 && sol.s < 0.66, "{}", sol.s);
        assert!(sol.residual <= 1e-10);
        let (lo, hi) = sol.bracket;
        assert!(pressure_sum(2, 2, &int(0), lo).unwrap() >= 1.0);
        assert!(pressure_sum(2, 2, &int(0), hi).unwrap() <= 1.0);
    }

    #[test]
    fn first_block_masses() {
        let schedule = CantorSchedule::new(2, 2, int(0), vec![4]).unwrap();
        let sol = solve_s(2, 2, &int(0), 1e-10).unwrap();
        let m = assign_measure(&schedule, &sol, 2, 1000).unwrap();
        // I_2(1,1) has q_2 = 2.
        let tree = m.tree();
        let idx = (0..tree.level(2).len())
            .find(|&i| tree.word(2, i).quotients() == [1, 1])
            .unwrap();
        assert!((m.mass(2, idx) - 0.25f64.powf(sol.s)).abs() < 1e-15);
        assert!((m.mass(2, idx) - 0.404).abs() < 1e-3);
        let report = normalization_audit(&m, 2);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn window_levels_conserve_mass() {
        let schedule = CantorSchedule::new(2, 2, int(1), vec![1, 1]).unwrap();
        let sol = solve_s(2, 2, &int(1), 1e-10).unwrap();
        let m = assign_measure(&schedule, &sol, 9, 1_000_000).unwrap();
        for n in 0..=9 {
            let report = normalization_audit(&m, n);
            assert!(report.passed, "{report:?}");
        }
        assert_eq!(m.role(4), LevelRole::Window);
        assert_eq!(m.role(3), LevelRole::WindowMinus1);
        assert_eq!(m.role(2), LevelRole::WindowMinus2);
        assert_eq!(m.role(6), LevelRole::WindowMinus2);
        assert_eq!(m.role(9), LevelRole::Intermediate);
        for (i, node) in m.tree().level(3).iter().enumerate() {
            assert_eq!(m.mass(3, i), m.mass(2, node.parent));
        }
        for (i, node) in m.tree().level(4).iter().enumerate() {
            let parent = m.tree().node(3, node.parent);
            assert_eq!(m.mass(4, i), m.mass(3, node.parent) / parent.rule.count() as f64);
        }
    }

    #[test]
    fn quarter_power_split_is_reported() {
        let schedule = CantorSchedule::new(2, 2, int(1), vec![1]).unwrap();
        let sol = solve_s(2, 2, &int(1), 1e-10).unwrap();
        let m = assign_measure_with(&schedule, &sol, 4, 100_000, WindowSplit::QuarterPower).unwrap();
        assert!(!normalization_audit(&m, 4).passed);
    }

    #[test]
    fn mismatched_solution_is_rejected() {
        let schedule = CantorSchedule::new(3, 2, int(1), vec![1]).unwrap();
        let sol = solve_s(2, 2, &int(1), 1e-10).unwrap();
        assert!(matches!(
            assign_measure(&schedule, &sol, 3, 1000),
            Err(PressureError::MissingSolution(..))
        ));
    }
}
