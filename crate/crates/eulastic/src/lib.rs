//! Variational solver and verification suite for two-phase elastic
//! media whose interface energy lives in the deformed configuration.
//!
//! The crate provides:
//!
//! - simplicial meshes with P1 deformation and phase fields ([`mesh`]),
//! - per-element deformation measures, injectivity and volume
//!   diagnostics ([`kinematics`]),
//! - polyconvex two-phase bulk energies plus sharp and diffuse
//!   interface energies assembled by pullback ([`energy`]),
//! - the weak pairings and facet measures that tie the deformed
//!   perimeter to the total variation of a vector measure on the
//!   reference domain ([`measures`]),
//! - projected gradient descent with feasibility-preserving line
//!   search ([`optimize`]),
//! - diffuse-to-sharp convergence instrumentation ([`gamma`]),
//! - independent brute-force references used by the test and
//!   verification suites ([`oracle`]).

// Validation uses `!(x > 0.0)` throughout so NaN parameters are
// rejected along with nonpositive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod config;
pub mod energy;
pub mod gamma;
pub mod kinematics;
pub mod measures;
pub mod mesh;
pub mod optimize;
pub mod oracle;
pub mod quadrature;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("infeasible state: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: String) -> Self {
        Error::InvalidArgument(msg)
    }

    pub fn degenerate_geometry(msg: String) -> Self {
        Error::DegenerateGeometry(msg)
    }

    pub fn unsupported_dimension(msg: String) -> Self {
        Error::UnsupportedDimension(msg)
    }

    pub fn infeasible(msg: String) -> Self {
        Error::Infeasible(msg)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
