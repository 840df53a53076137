//! Shared fixtures for the kernel benchmarks.

use cfdim_core::arith::int;
use cfdim_core::pressure::{solve_s, PressureSolution};
use cfdim_core::{CantorSchedule, Rational};

/// Rationals `k * 7919 mod d / d` with `d` near one million: deterministic,
/// spread over `[0, 1)`, with long expansions.
pub fn rationals(count: usize) -> Vec<Rational> {
    (0..count as i64)
        .map(|k| {
            let d = 999_983 - k;
            Rational::new(((k + 1) * 7919 % d).into(), d.into())
        })
        .collect()
}

/// The two-window `(M, L, τ) = (3, 2, 1)` schedule.
pub fn two_window_schedule() -> CantorSchedule {
    CantorSchedule::new(3, 2, int(1), vec![1, 1]).expect("valid schedule")
}

pub fn solution_for(schedule: &CantorSchedule) -> PressureSolution {
    solve_s(schedule.block_len(), schedule.cap(), schedule.tau(), 1e-10).expect("solvable")
}
