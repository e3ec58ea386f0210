//! Scenario documents.
//!
//! A scenario is one JSON object:
//!
//! ```json
//! {
//!   "name": "segment_div",
//!   "d": 2,
//!   "omega": { "lo": [-1, -1], "hi": [1, 1] },
//!   "measure": [
//!     { "kind": "graph", "height_axis": 2, "profile": "0",
//!       "lo": [-0.5, 0], "hi": [0.5, 0], "weight": 1 },
//!     { "kind": "ifs", "maps": [ { "ratio": 0.3333333333333333, "translation": [0.1, 0] } ],
//!       "lo": [0.1, 0], "hi": [0.9, 0], "generation": 8, "weight": 0.5 }
//!   ],
//!   "problem": { "kind": "divergence", "f": "sin(3*x1) + 0.5" },
//!   "eps": 0.5, "delta": 0.5,
//!   "resolution": 1000, "residual_tol": 5e-10, "max_stage": 60,
//!   "seed": 0, "grid": 200, "out": "out"
//! }
//! ```
//!
//! Axes are numbered from 1 as in the expressions. A graph piece lies over the box `lo..hi`
//! with its height coordinate given by `profile`; an IFS piece is the attractor of the listed
//! similarities `x -> ratio x + translation`, sampled at `generation`.
//!
//! Problem kinds:
//! - `divergence`: `f`
//! - `jacobian`: `g`
//! - `perturb-div`: `f` and `background`, one expression per component of `W`
//! - `perturb-jac`: `g`, `forward` and `inverse`, the components of `F` and `F^{-1}`
//!
//! Expressions use `x1..xd`, decimal literals, `+ - * /`, parentheses and `sin`, `cos`, `exp`.
//! `resolution`, `residual_tol`, `max_stage`, `seed`, `grid` and `out` are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{Diffeomorphism, DivergenceProblem, JacobianProblem, SolveOptions};
use crate::fields::{parse_expr, ExprRef, VectorField};
use crate::geometry::Aabb;
use crate::measures::{Carrier, GraphCarrier, IfsCarrier, ModelMeasure, Piece, Similarity};

use super::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub ratio: f64,
    pub translation: Vec<f64>,
}

fn default_cap() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceSpec {
    Graph {
        height_axis: usize,
        profile: String,
        lo: Vec<f64>,
        hi: Vec<f64>,
        weight: f64,
    },
    Ifs {
        maps: Vec<MapSpec>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        generation: usize,
        #[serde(default = "default_cap")]
        generation_cap: usize,
        weight: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Divergence {
        f: String,
    },
    Jacobian {
        g: String,
    },
    PerturbDiv {
        f: String,
        background: Vec<String>,
    },
    PerturbJac {
        g: String,
        forward: Vec<String>,
        inverse: Vec<String>,
    },
}

fn default_resolution() -> usize {
    SolveOptions::default().resolution
}
fn default_tol() -> f64 {
    SolveOptions::default().residual_tol
}
fn default_max_stage() -> usize {
    SolveOptions::default().max_stage
}
fn default_grid() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub d: usize,
    pub omega: BoxSpec,
    pub measure: Vec<PieceSpec>,
    pub problem: ProblemSpec,
    pub eps: f64,
    pub delta: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_max_stage")]
    pub max_stage: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub out: Option<String>,
}

/// A scenario turned into solver input.
pub enum Task {
    Divergence(DivergenceProblem<f64>),
    Background(DivergenceProblem<f64>, VectorField<f64>),
    Jacobian(JacobianProblem<f64>),
    Perturb(JacobianProblem<f64>, Diffeomorphism<f64>),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(if path == "." { "scenario".into() } else { path }, e.into_inner().to_string())
    })?;
    s.validate()?;
    Ok(s)
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(field, format!("must be a positive finite number, got {v}")))
    }
}

fn expr(field: &str, src: &str, d: usize) -> Result<ExprRef<f64>, CliError> {
    parse_expr(src, d).map_err(|e| CliError::Expression {
        field: field.into(),
        text: src.into(),
        error: e,
    })
}

fn exprs(field: &str, srcs: &[String], d: usize) -> Result<Vec<ExprRef<f64>>, CliError> {
    if srcs.len() != d {
        return Err(schema(field, format!("needs {d} components, got {}", srcs.len())));
    }
    srcs.iter().enumerate().map(|(i, s)| expr(&format!("{field}[{i}]"), s, d)).collect()
}

fn point(field: &str, v: &[f64], d: usize) -> Result<(), CliError> {
    if v.len() != d {
        return Err(schema(field, format!("needs {d} coordinates, got {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(schema(format!("{field}[{i}]"), "must be finite"));
    }
    Ok(())
}

impl Scenario {
    fn validate(&self) -> Result<(), CliError> {
        let d = self.d;
        if d < 2 {
            return Err(schema("d", format!("dimension must be at least 2, got {d}")));
        }
        point("omega.lo", &self.omega.lo, d)?;
        point("omega.hi", &self.omega.hi, d)?;
        if let Some(k) = (0..d).find(|&k| self.omega.lo[k] >= self.omega.hi[k]) {
            return Err(schema("omega", format!("lo[{k}] must be below hi[{k}]")));
        }
        positive("eps", self.eps)?;
        positive("delta", self.delta)?;
        positive("residual_tol", self.residual_tol)?;
        if self.resolution == 0 {
            return Err(schema("resolution", "must be positive"));
        }
        if self.grid < 2 {
            return Err(schema("grid", "must be at least 2"));
        }
        if self.measure.is_empty() {
            return Err(schema("measure", "needs at least one piece"));
        }
        for (i, p) in self.measure.iter().enumerate() {
            let f = |s: &str| format!("measure[{i}].{s}");
            match p {
                PieceSpec::Graph {
                    height_axis,
                    profile,
                    lo,
                    hi,
                    weight,
                } => {
                    if !(1..=d).contains(height_axis) {
                        return Err(schema(f("height_axis"), format!("must be in 1..={d}")));
                    }
                    expr(&f("profile"), profile, d)?;
                    point(&f("lo"), lo, d)?;
                    point(&f("hi"), hi, d)?;
                    positive(&f("weight"), *weight)?;
                }
                PieceSpec::Ifs { maps, lo, hi, weight, .. } => {
                    if maps.is_empty() {
                        return Err(schema(f("maps"), "needs at least one map"));
                    }
                    for (j, m) in maps.iter().enumerate() {
                        if !(m.ratio > 0.0 && m.ratio < 1.0) {
                            return Err(schema(f(&format!("maps[{j}].ratio")), "must lie in (0, 1)"));
                        }
                        point(&f(&format!("maps[{j}].translation")), &m.translation, d)?;
                    }
                    point(&f("lo"), lo, d)?;
                    point(&f("hi"), hi, d)?;
                    positive(&f("weight"), *weight)?;
                }
            }
        }
        match &self.problem {
            ProblemSpec::Divergence { f } => expr("problem.f", f, d).map(drop),
            ProblemSpec::Jacobian { g } => expr("problem.g", g, d).map(drop),
            ProblemSpec::PerturbDiv { f, background } => {
                expr("problem.f", f, d)?;
                exprs("problem.background", background, d).map(drop)
            }
            ProblemSpec::PerturbJac { g, forward, inverse } => {
                expr("problem.g", g, d)?;
                exprs("problem.forward", forward, d)?;
                exprs("problem.inverse", inverse, d).map(drop)
            }
        }
    }

    pub fn omega(&self) -> Aabb<f64> {
        Aabb::new(self.omega.lo.clone(), self.omega.hi.clone())
    }

    pub fn measure(&self) -> Result<ModelMeasure<f64>, CliError> {
        let omega = self.omega();
        let d = self.d;
        let mut pieces = Vec::new();
        for (i, p) in self.measure.iter().enumerate() {
            let field = format!("measure[{i}]");
            let bad = |e: crate::measures::MeasureError| schema(field.clone(), e.to_string());
            let (carrier, weight) = match p {
                PieceSpec::Graph {
                    height_axis,
                    profile,
                    lo,
                    hi,
                    weight,
                } => {
                    let g = GraphCarrier::new(
                        height_axis - 1,
                        expr(&format!("{field}.profile"), profile, d)?,
                        Aabb::new(lo.clone(), hi.clone()),
                        &omega,
                    )
                    .map_err(bad)?;
                    (Carrier::Graph(g), *weight)
                }
                PieceSpec::Ifs {
                    maps,
                    lo,
                    hi,
                    generation,
                    generation_cap,
                    weight,
                } => {
                    let maps = maps
                        .iter()
                        .map(|m| Similarity {
                            ratio: m.ratio,
                            translation: m.translation.clone(),
                        })
                        .collect();
                    let f = IfsCarrier::new(maps, Aabb::new(lo.clone(), hi.clone()), *generation, *generation_cap, &omega).map_err(bad)?;
                    (Carrier::Ifs(f), *weight)
                }
            };
            pieces.push(Piece { carrier, weight });
        }
        ModelMeasure::new(omega, pieces).map_err(|e| schema("measure", e.to_string()))
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            resolution: self.resolution,
            max_stage: self.max_stage,
            residual_tol: self.residual_tol,
        }
    }

    pub fn task(&self) -> Result<Task, CliError> {
        let m = self.measure()?;
        let d = self.d;
        let opts = self.options();
        Ok(match &self.problem {
            ProblemSpec::Divergence { f } => {
                let mut p = DivergenceProblem::new(m, expr("problem.f", f, d)?, self.eps, self.delta);
                p.options = opts;
                Task::Divergence(p)
            }
            ProblemSpec::PerturbDiv { f, background } => {
                let mut p = DivergenceProblem::new(m, expr("problem.f", f, d)?, self.eps, self.delta);
                p.options = opts;
                let w = VectorField::from_components(exprs("problem.background", background, d)?);
                Task::Background(p, w)
            }
            ProblemSpec::Jacobian { g } => {
                let mut p = JacobianProblem::new(m, expr("problem.g", g, d)?, self.eps, self.delta);
                p.options = opts;
                Task::Jacobian(p)
            }
            ProblemSpec::PerturbJac { g, forward, inverse } => {
                let mut p = JacobianProblem::new(m, expr("problem.g", g, d)?, self.eps, self.delta);
                p.options = opts;
                let f = Diffeomorphism {
                    forward: exprs("problem.forward", forward, d)?,
                    inverse: exprs("problem.inverse", inverse, d)?,
                };
                Task::Perturb(p, f)
            }
        })
    }
}
