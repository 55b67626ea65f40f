//! Assembly and solution of the discrete semilinear problems.

use std::time::Duration;

pub mod cylinder;
pub mod linear;
pub mod monotone;
pub mod newton;
pub mod operator;
pub mod plane;
pub mod study;
pub mod surface;

pub use cylinder::{solve_half_cylinder, CylinderOptions, CylinderSolution};
pub use linear::{linear_solve, LinearSolution, ShiftedOperator};
pub use monotone::{monotone_iterate, MonotoneOptions, MonotoneSolution};
pub use newton::{newton_solve, NewtonOptions};
pub use operator::{
    assemble_problem, assemble_surface, horizontal_laplacian, scalar_residual, Laplacian, Mode, SemilinearProblem,
};
pub use plane::{solve_knot_plane, PlaneOptions, PlaneSolution};
pub use study::{convergence_study, StudyRow, StudyTable};
pub use surface::{solve_limit_surface, SurfaceSolution};

/// Iteration diagnostics of a nonlinear solve.
#[derive(Clone, Debug, Default)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// L∞ norm of the scaled residual after each iteration.
    pub residuals: Vec<T>,
    /// L∞ change of the iterate(s) in each iteration.
    pub changes: Vec<T>,
    pub monotone: Vec<bool>,
    pub bracketed: Vec<bool>,
    pub final_residual: T,
    pub linear_iterations: usize,
    pub wall_time: Duration,
}

impl<T> SolveReport<T> {
    pub fn all_monotone(&self) -> bool {
        self.monotone.iter().all(|&b| b)
    }

    pub fn all_bracketed(&self) -> bool {
        self.bracketed.iter().all(|&b| b)
    }
}
