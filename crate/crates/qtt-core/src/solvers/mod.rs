//! Sweeping solvers on trains: the DMRG eigensolver, DMRG-like and AMEn
//! linear solvers, and approximate extremum search.

mod eig;
mod krylov;
mod linmap;
mod linsolve;
mod minmax;

pub use eig::{eigsolve, EigResult};
pub use krylov::{gmres, lanczos};
pub use linmap::LinearMap;
pub use linsolve::{linsolve, LinSolveMethod, LinSolveResult};
pub use minmax::{min_max, Extremum, MinMaxResult};

use crate::decomp::TruncationRule;

/// Sweep schedule shared by the solvers: super-core width, number of
/// full sweeps, the truncation rule for re-splitting super-cores, and
/// the local Krylov budget. `tol` doubles as the local solver tolerance
/// and the global termination threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPlan {
    pub ncores: usize,
    pub nsweeps: usize,
    pub rule: TruncationRule,
    pub local_iters: usize,
    pub tol: f64,
}

impl SweepPlan {
    pub fn new(ncores: usize, nsweeps: usize, rule: TruncationRule) -> Self {
        Self {
            ncores,
            nsweeps,
            rule,
            local_iters: 200,
            tol: 1e-10,
        }
    }
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self::new(2, 10, TruncationRule::exact())
    }
}
