//! Continued-fraction laboratory for Dirichlet non-improvable numbers.
//!
//! The crate implements, with exact rational arithmetic wherever a quantity is
//! rational:
//!
//! * [`cf`]: expansions, convergents, reversed words, the Cassels identity and
//!   Dirichlet's theorem via convergents.
//! * [`geometry`]: basic cylinders, fundamental intervals and their gaps.
//! * [`classify`]: approximating functions `Ψ`, their lower order `τ`,
//!   finite-depth membership evidence for `G(Ψ)` and `K(Ψ)`, and the
//!   Jarník-type series classifier with the dimension formula `2/(τ+2)`.
//! * [`cantor`]: the Cantor subsets `E_M` and `E*_M` and their levels.
//! * [`pressure`]: the pressure equation and the mass distribution `μ`.
//! * [`dimension`]: Hölder audits, the mass distribution lower bound and
//!   box counting.
//! * [`audit`]: findings-oriented drivers over all of the above.

pub mod arith;
pub mod audit;
pub mod cantor;
pub mod cf;
pub mod classify;
pub mod dimension;
pub mod geometry;
pub mod pressure;
pub mod stats;

pub use arith::{parse_rational, Rational};
pub use cantor::{CantorSchedule, Construction, GeneralSchedule, LevelSet};
pub use cf::{CasselsReport, CfWord};
pub use classify::{LowerOrder, PsiSpec, SeriesVerdict};
pub use dimension::{DimensionEstimate, HolderAudit};
pub use geometry::{Cylinder, GapReport, Interval, LevelCase};
pub use pressure::{MeasureTree, PressureSolution};
