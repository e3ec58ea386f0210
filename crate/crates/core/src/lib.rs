//! Constructive divergence and Jacobian equations with measure data concentrated on cone-null sets.
//!
//! ```
//! use lusin::assembly::{solve_divergence, DivergenceProblem};
//! use lusin::{catalog, fields::parse_expr, verify::verify_divergence};
//!
//! let p = DivergenceProblem::new(catalog::segment_measure(), parse_expr("x1", 2).unwrap(), 0.5, 0.5);
//! let s = solve_divergence(&p).unwrap();
//! assert!(verify_divergence(&s, &p, 100, 1).pass);
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait)]

pub mod assembly;
pub mod catalog;
pub mod cli;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod measures;
pub mod report;
pub mod scalar;
pub mod scheme;
pub mod verify;
pub mod width;

pub use report::{Check, Report};
pub use scalar::Real;

pub type Aabb64 = geometry::Aabb<f64>;
pub type Cone64 = geometry::Cone<f64>;
pub type DirectionNet64 = geometry::DirectionNet<f64>;
pub type ModelMeasure64 = measures::ModelMeasure<f64>;
pub type Expr64 = fields::ExprRef<f64>;
pub type VectorField64 = fields::VectorField<f64>;
pub type DivergenceProblem64 = assembly::DivergenceProblem<f64>;
pub type JacobianProblem64 = assembly::JacobianProblem<f64>;
pub type Solution64 = assembly::Solution<f64>;
pub type MapSolution64 = assembly::MapSolution<f64>;
