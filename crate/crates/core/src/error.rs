//! Error type shared by every stage of the pipeline.
//!
//! Numerical routines return structured errors instead of panicking: a solver
//! that runs out of iterations still hands back its partial result so callers
//! can inspect how far it got.

use crate::solver::SolveReport;

/// Crate-wide error enum.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain discretization produced no interior nodes")]
    EmptyInterior,

    #[error("domain is not bounded away from its bounding box on axis {axis}: {detail}")]
    UnboundedDomain { axis: usize, detail: String },

    #[error("expression evaluation failed: {0}")]
    Evaluation(String),

    #[error("expression parse error: {0}")]
    Parse(String),

    #[error("offset {offset:?} is not a lattice vector for spacing h = {h}")]
    NonLatticeOffset { offset: Vec<f64>, h: f64 },

    #[error("grid functions live on different grids (fingerprints {a:#x} vs {b:#x})")]
    GridMismatch { a: u64, b: u64 },

    #[error("requested region contains no nodes")]
    EmptyRegion,

    #[error("node set is empty")]
    EmptySet,

    #[error("stencil neighbor missing at interior node {node:?}; grid classification is inconsistent")]
    MissingNeighbor { node: Vec<i64> },

    #[error("bisection bracket could not be established at node {node:?} (widened {attempts} times)")]
    BracketFailure { node: Vec<i64>, attempts: u32 },

    #[error("right-hand side is not monotone in s: {detail}")]
    NonMonotoneRhs { detail: String },

    #[error("solver hit max_iter = {max_iter} before meeting tolerance (sup_update = {sup_update:.3e}, residual = {residual:.3e})")]
    MaxIterExceeded {
        max_iter: u64,
        sup_update: f64,
        residual: f64,
        report: Box<SolveReport>,
    },

    #[error("inf-convolution radius {r} leaves no inner node: every interior node sees an offset outside the domain")]
    OffsetLeavesDomain { r: f64 },

    #[error("domains are not nested: {detail}")]
    NonNested { detail: String },

    #[error("convergence-order fit is degenerate: {detail}")]
    DegenerateFit { detail: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
