//! Closed-form scalar, vector and map fields with exact gradients and certified bounds.

mod bump;
mod disjoint;
mod expr;
mod field;
mod interval;
mod parse;
mod profile;

pub use bump::Bump;
pub use disjoint::{DisjointSum, DisjointTerm};
pub use expr::{Expr, ExprRef, Prim};
pub use field::{central_directional, central_gradient, MapField, ScalarField, VectorField, VectorTerm};
#[allow(unused_imports)]
pub(crate) use field::{identity, matmul};
pub use interval::Interval;
pub use parse::parse_expr;
pub use profile::{default_plateau, plateau_profile, smoothstep, CoverProfile, SmoothClamp, SMOOTHSTEP_SLOPE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("supports of terms {0} and {1} overlap")]
    OverlappingSupports(usize, usize),
    #[error("no symbolic derivative for {0}")]
    NotSymbolic(&'static str),
}
