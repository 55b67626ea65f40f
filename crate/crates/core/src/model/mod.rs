//! Closed-form models, the reduced ODE, formal expansions, spliced
//! approximate solutions and barrier fields.

pub mod approx;
pub mod barrier;
pub mod closed_form;
pub mod expansion;
pub mod ode;

pub use approx::{build_approximate, build_approximate_solution, ApproxOptions, ApproximateSolution, FarField};
pub use closed_form::{eval_model_phi, eval_sinh_family, eval_sn, eval_un, ModelSolution};
pub use expansion::{formal_expansion, ExpansionTable};
pub use ode::{solve_mikhaylov_ode, OdeSolution, Quadrature};
