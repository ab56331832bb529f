//! Measured Reeb graphs, circulation graphs and Casimir invariants of
//! two-dimensional ideal fluids on closed triangulated surfaces.
//!
//! The pipeline runs `geometry` (mesh, PL Morse field) -> `reeb` (graph and
//! quotient map) -> `measure` (pushforward of the area form, moments) ->
//! `circulation` (level-cycle integrals, antiderivatives) -> `orbit`
//! (isomorphism tests). `moments` handles Hausdorff feasibility and density
//! reconstruction; `euler_torus` is a spectral flow solver used to check
//! conservation along the dynamics.

pub mod circulation;
pub mod cli;
pub mod error;
pub mod euler_torus;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod moments;
pub mod orbit;
pub mod reeb;
pub mod scalar;
pub mod unionfind;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Surface = geometry::TriangulatedSurface<f64>;
pub type Field = geometry::MorseField<f64>;
pub type Graph = reeb::ReebGraph<f64>;
pub type Quotient = reeb::QuotientMap<f64>;
pub type OneForm = circulation::DiscreteOneForm<f64>;
pub type Measured = measure::MeasuredReebGraph<f64>;
pub type Circulation = circulation::CirculationGraph<f64>;
