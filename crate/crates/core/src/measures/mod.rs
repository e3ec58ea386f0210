//! Singular model measures, their atom clouds, bundle oracles and cone-null certificates.

mod carrier;
mod cloud;
mod nulltest;

pub use carrier::{cone_null_certificate, Carrier, Certificate, DiscreteCarrier, GraphCarrier, IfsCarrier, Similarity};
pub use cloud::{bundle_at, inner_regular_refine, sample_atoms, AtomCloud, ModelMeasure, Piece, Refinement, MAX_ATOMS};
pub use nulltest::{empirical_cone_null_test, NullTestReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("malformed carrier: {0}")]
    Malformed(String),
    #[error("certificate rejected: {0}")]
    Rejected(String),
    #[error("{requested} atoms requested, limit is {limit}")]
    TooManyAtoms { requested: usize, limit: usize },
    #[error("point {0} is not on any carrier")]
    NotOnCarrier(String),
    #[error("predicate '{predicate}' must drop mass {needed}, budget is {budget}")]
    BudgetExceeded { predicate: String, needed: f64, budget: f64 },
}
