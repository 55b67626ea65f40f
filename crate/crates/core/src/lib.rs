//! Numerical laboratory for the extended Bogomolny equations in their scalar
//! Hermitian-metric reduction.
//!
//! The crate solves
//!
//! ```text
//! K - (Δ_{g0} + ∂_y²) u + |α|² e^{2u} - |β|² e^{-2u} = 0
//! ```
//!
//! on half-cylinders `Σ x R+` and half-spaces `C x R+` with Nahm pole
//! behaviour `u ~ -log y` at `y = 0` and knot singularities at the zeros of
//! `α`. Around it sit closed-form model solutions, the reduced ODE, formal
//! boundary expansions, indicial-root spectral analysis of the hemisphere
//! operator, gauge-field reconstruction and the metric distance used for
//! uniqueness.
//!
//! Numerical routines are generic over [`Real`] (`f32` or `f64`); the type
//! aliases below fix the scalar to `f64`.

pub mod domain;
pub mod error;
pub mod gauge;
pub mod higgs;
pub mod io;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use domain::{
    build_grid, field_norms, spherical_coords, DomainKind, DomainSpec, Grading, KnotPoint, NodeClass,
    Region,
};
pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = domain::GradedGrid<f64>;
pub type Field = domain::ScalarField<f64>;
pub type Spec = domain::DomainSpec<f64>;
pub type Knot = domain::KnotPoint<f64>;
pub type Higgs = higgs::HiggsData<f64>;
pub type Poly = higgs::Polynomial<f64>;
pub type Problem = solver::SemilinearProblem<f64>;
pub type Barriers = model::barrier::BarrierPair<f64>;
pub type Metric = gauge::HermitianMetric<f64>;
pub type Triplet = gauge::UnitaryTriplet<f64>;
pub type Spectrum = spectral::Spectrum<f64>;
pub type Ode = model::ode::OdeSolution<f64>;
