use thiserror::Error;

use crate::geometry::ViolationReport;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("edge ({0}, {1}) has {2} incident triangles, expected 2")]
    NonManifold(usize, usize, usize),
    #[error("vertex {0} has a link that is not a single cycle")]
    NonManifoldVertex(usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by both incident triangles")]
    Orientation(usize, usize),
    #[error("{what}: expected {expected}, found {found}")]
    CountMismatch { what: &'static str, expected: usize, found: usize },
    #[error("triangle {tri} has non-positive area {area}")]
    InvalidArea { tri: usize, area: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("field is not simple Morse: {0}")]
    NotSimple(ViolationReport),
    #[error("degenerate saddle at vertex {vertex} (multiplicity {multiplicity}) cannot be removed by perturbation")]
    PerturbFailure { vertex: usize, multiplicity: u32 },
    #[error("level {t} outside open range ({lo}, {hi})")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("density does not admit an antiderivative: total mass residual {residual}")]
    NoSolution { residual: f64 },
    #[error("pins do not cut the graph into a tree: {0}")]
    BadPinPlacement(String),
    #[error("pinned values are inconsistent with the Kirchhoff rule (residual {residual})")]
    Infeasible { residual: f64 },
    #[error("circulation violates the antiderivative rules at node {node} (residual {residual})")]
    AntiderivativeViolation { node: usize, residual: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("series evaluation diverges: |lambda| = {modulus} <= {radius}")]
    DivergenceRisk { modulus: f64, radius: f64 },
    #[error("moment sequence is not Hausdorff feasible ({violations} violations, worst {worst})")]
    InfeasibleMoments { violations: usize, worst: f64 },
    #[error("reconstruction ill-conditioned: effective N = {effective_n}, eps = {eps}, defect = {defect}")]
    IllConditioned { effective_n: usize, eps: f64, defect: f64 },
    #[error("vorticity has non-zero mean {0}")]
    NonZeroMean(f64),
    #[error("time step {dt} violates CFL bound (courant number {courant})")]
    CflViolation { dt: f64, courant: f64 },
    #[error("Reeb graph topology changed at t = {0}")]
    TopologyChange(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
