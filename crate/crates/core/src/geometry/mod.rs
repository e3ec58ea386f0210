//! Cones, subspaces, boxes and direction nets on the unit sphere.

mod aabb;
mod cone;
mod net;

pub use aabb::Aabb;
pub use cone::{c_alpha, subspace_transverse, Cone, Direction, Subspace};
pub use net::{build_direction_net, verify_net, DirectionNet, NetReport, NetWitness};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite component")]
    NonFinite,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector norm {0} is not 1")]
    NotUnit(f64),
    #[error("half-angle {0} outside (0, pi/2)")]
    AngleOutOfRange(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis is not orthonormal")]
    NotOrthonormal,
    #[error("dimension {0} unsupported (need d >= 2)")]
    BadDimension(usize),
    #[error("direction net for d = {d}, alpha = {alpha} not certified after {attempts} refinements")]
    NetNotCertified { d: usize, alpha: f64, attempts: usize },
}
