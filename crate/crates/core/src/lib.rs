//! Numerical laboratory for disordered magnetic Schrödinger operators on the
//! plane and on the Dirichlet half-plane.
//!
//! The crate discretizes the Landau operator with random potential on finite
//! lattices and provides the complex heat-kernel functional calculus, the
//! bulk and edge traces, edge currents, the Fedosov index of the winding
//! unitary, the cocycle pairing and the bulk Chern character, together with
//! deterministic ensemble experiments driven by a TOML configuration.

extern crate blas_src;

pub mod covariant_algebra;
pub mod edge_current_index;
pub mod experiment;
pub mod functional_calculus;
pub mod heat_kernels;
pub mod lattice_hamiltonian;
pub mod linalg;

pub use covariant_algebra::{TraceResult, Window};
pub use edge_current_index::{GapSpec, QuantizationReport};
pub use experiment::{ExperimentConfig, RunManifest};
pub use functional_calculus::{QuadratureSpec, SmoothProfile};
pub use heat_kernels::{BoundId, BoundReport, ComplexTime};
pub use lattice_hamiltonian::{Boundary, DisorderModel, Geometry, OperatorMatrix, Realization};
pub use linalg::C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("kernel not edge-localized: {leaked:.3e} of the window mass sits in its top rows")]
    NotEdgeLocalized { leaked: f64 },
    #[error("gap violated: spectrum reaches within {distance:.3e} of [{lo}, {hi}]")]
    GapViolation { lo: f64, hi: f64, distance: f64 },
    #[error("quadrature tail {tail:.3e} exceeds tolerance {tol:.1e}; increase t_max")]
    QuadratureTail { tail: f64, tol: f64 },
    #[error("degenerate decay fit: {0}")]
    DegenerateFit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
