//! Jacobian equations `det D Phi = g` and perturbations of diffeomorphisms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_budget, solve_cloud, AssemblyError, Solution, SolveOptions};
use crate::fields::{Expr, ExprRef, MapField};
use crate::geometry::{Aabb, Subspace};
use crate::linalg::{det, mat_vec, operator_norm_bound};
use crate::measures::{sample_atoms, AtomCloud, Carrier, DiscreteCarrier, ModelMeasure, Piece};
use crate::scalar::{dot, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct JacobianProblem<T> {
    pub measure: ModelMeasure<T>,
    /// The target `g`.
    pub datum: ExprRef<T>,
    pub eps: T,
    pub delta: T,
    pub options: SolveOptions,
}

impl<T: Real> JacobianProblem<T> {
    pub fn new(measure: ModelMeasure<T>, datum: ExprRef<T>, eps: T, delta: T) -> Self {
        Self {
            measure,
            datum,
            eps,
            delta,
            options: SolveOptions::default(),
        }
    }
}

/// A map with closed-form inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Diffeomorphism<T> {
    pub forward: Vec<ExprRef<T>>,
    pub inverse: Vec<ExprRef<T>>,
}

impl<T: Real> Diffeomorphism<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.forward.iter().map(|f| f.value(x)).collect()
    }

    pub fn apply_inverse(&self, y: &[T]) -> Vec<T> {
        self.inverse.iter().map(|f| f.value(y)).collect()
    }

    pub fn jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        self.forward.iter().map(|f| f.grad(x)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Pushforward<T> {
    pub map: Diffeomorphism<T>,
    /// `U`, containing every pushed atom.
    pub image_box: Aabb<T>,
    /// Certified box containing `F^{-1}(U)`, inside `Omega`.
    pub preimage_box: Aabb<T>,
    /// Lower bound of `dist(U, boundary of F(Omega))`.
    pub boundary_distance: T,
    pub lip_forward: T,
    pub lip_inverse: T,
    /// `h = (g o F^{-1}) det DF^{-1}`.
    pub transported: ExprRef<T>,
    pub budget: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MapSolution<T> {
    pub map: MapField<T>,
    /// Scalar assembly behind the displacement; on the pushed atoms for perturbations.
    pub inner: Solution<T>,
    pub target: ExprRef<T>,
    /// `max |g - 1|` (or `max |g/det DF - 1|`) over the atoms.
    pub l: T,
    pub eps: T,
    pub delta: T,
    pub diffeo: bool,
    pub inverse_lip_bound: Option<T>,
    /// Certified `Lip(Phi - base)`.
    pub certified_lip: T,
    /// Certified `sup |Phi - base|`.
    pub certified_sup: T,
    /// Retained atoms in the domain of `Phi`.
    pub k: AtomCloud<T>,
    pub det_rank_one: Vec<T>,
    pub det_direct: Vec<T>,
    pub push: Option<Pushforward<T>>,
}

/// `(1 + d_v u)` at `y` for the active group, from the inner solution.
fn rank_one_factor<T: Real>(inner: &Solution<T>, y: &[T]) -> T {
    let s = inner.groups.iter().fold(T::zero(), |acc, g| acc + dot(&g.u.grad(y), &g.direction));
    T::one() + s
}

fn finish<T: Real>(
    inner: Solution<T>,
    target: ExprRef<T>,
    eps: T,
    delta: T,
    push: Option<Pushforward<T>>,
    k: AtomCloud<T>,
) -> MapSolution<T> {
    let map = MapField {
        base: push.as_ref().map(|p| p.map.forward.clone()),
        displacement: inner.field.clone(),
    };
    let l = inner.m;
    let factor = (T::one() + delta) * l;
    let (lip_f, lip_inv) = push.as_ref().map_or((T::one(), T::one()), |p| (p.lip_forward, p.lip_inverse));
    let diffeo = factor < T::one();
    let dets: Vec<(T, T)> = k
        .points
        .par_iter()
        .map(|x| {
            let direct = det(map.jacobian(x));
            let one = match &push {
                None => rank_one_factor(&inner, x),
                Some(p) => rank_one_factor(&inner, &p.map.apply(x)) * det(p.map.jacobian(x)),
            };
            (one, direct)
        })
        .collect();
    MapSolution {
        certified_lip: inner.certified_lip * lip_f,
        certified_sup: inner.certified_sup,
        map,
        target,
        l,
        eps,
        delta,
        diffeo,
        inverse_lip_bound: diffeo.then(|| lip_inv / (T::one() - factor)),
        k,
        det_rank_one: dets.iter().map(|d| d.0).collect(),
        det_direct: dets.iter().map(|d| d.1).collect(),
        push,
        inner,
    }
}

/// `Phi = Id + sum_j u_j v_j` with `det D Phi = g` on `K`.
pub fn solve_jacobian<T: Real>(p: &JacobianProblem<T>) -> Result<MapSolution<T>, AssemblyError> {
    check_budget(p.eps, p.delta, &p.datum, p.measure.dim())?;
    let cloud = sample_atoms(&p.measure, p.options.resolution)?;
    let shifted = Expr::sub(p.datum.clone(), Expr::constant(T::one()));
    let inner = solve_cloud(&p.measure, cloud, &shifted, p.eps, p.delta, &p.options)?;
    let k = inner.k.clone();
    Ok(finish(inner, p.datum.clone(), p.eps, p.delta, None, k))
}

/// Symbolic determinant by cofactor expansion along the first row.
fn det_expr<T: Real>(m: &[Vec<ExprRef<T>>]) -> ExprRef<T> {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::new();
    for c in 0..n {
        let minor: Vec<Vec<ExprRef<T>>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, e)| e.clone()).collect())
            .collect();
        let t = Expr::product(m[0][c].clone(), det_expr(&minor));
        terms.push(if c % 2 == 0 { t } else { Expr::neg(t) });
    }
    Expr::sum(terms)
}

fn lipschitz_bound<T: Real>(map: &[ExprRef<T>], region: &Aabb<T>) -> Result<T, AssemblyError> {
    let d = map.len();
    let mut constant = Vec::with_capacity(d);
    for f in map {
        let row: Option<Vec<T>> = (0..d).map(|k| f.partial(k).ok().and_then(|p| p.as_const())).collect();
        match row {
            Some(r) => constant.push(r),
            None => break,
        }
    }
    if constant.len() == d {
        return Ok(operator_norm_bound(&constant));
    }
    let frob = map.iter().fold(T::zero(), |acc, f| {
        let g = f.grad_bound(region);
        acc + g * g
    });
    Ok(frob.sqrt())
}

fn image_bounds<T: Real>(map: &[ExprRef<T>], region: &Aabb<T>) -> Aabb<T> {
    let iv: Vec<_> = map.iter().map(|f| f.bounds(region)).collect();
    Aabb::new(iv.iter().map(|i| i.lo).collect(), iv.iter().map(|i| i.hi).collect())
}

/// `Phi = Psi o F` with `det D Phi = g` on `K = F^{-1}(K')`, where `Psi` solves the
/// Jacobian equation for the transported datum on the pushed-forward atoms.
pub fn perturb_diffeomorphism<T: Real>(f: &Diffeomorphism<T>, p: &JacobianProblem<T>) -> Result<MapSolution<T>, AssemblyError> {
    let d = p.measure.dim();
    check_budget(p.eps, p.delta, &p.datum, d)?;
    if f.forward.len() != d || f.inverse.len() != d {
        return Err(AssemblyError::BadProblem(format!(
            "map must have {d} components and an inverse of the same size"
        )));
    }
    let omega = &p.measure.omega;
    let cloud = sample_atoms(&p.measure, p.options.resolution)?;
    let mut pushed = Vec::with_capacity(cloud.len());
    let mut bundles = Vec::with_capacity(cloud.len());
    let tol = T::lit(1e-9);
    for i in 0..cloud.len() {
        let x = &cloud.points[i];
        let y = f.apply(x);
        let back = f.apply_inverse(&y);
        let err = back.iter().zip(x).fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        if !(err <= tol) {
            return Err(AssemblyError::NotInvertible {
                atom: cloud.id[i],
                detail: format!("inverse mismatch {err}"),
            });
        }
        let j = f.jacobian(x);
        let dj = det(j.clone());
        if !(dj.abs() > T::lit(1e-12)) || !dj.is_finite() {
            return Err(AssemblyError::NotInvertible {
                atom: cloud.id[i],
                detail: format!("det DF = {dj}"),
            });
        }
        let b = cloud.bundle(&p.measure, i);
        let mapped: Vec<Vec<T>> = b.basis().iter().map(|v| mat_vec(&j, v)).collect();
        bundles.push(Subspace::span(d, &mapped));
        pushed.push(y);
    }

    let hull = Aabb::hull(pushed.iter().map(Vec::as_slice)).ok_or_else(|| AssemblyError::BadProblem("no atoms".into()))?;
    let mut r = T::lit(0.5) * hull.diameter() + T::lit(1e-3);
    let (image_box, preimage_box) = loop {
        let u = hull.inflate_uniform(r);
        let b = image_bounds(&f.inverse, &u);
        if omega.contains_box(&b) && omega.clearance(&b).iter().all(|&c| c > T::zero()) {
            break (u, b);
        }
        r = r * T::lit(0.5);
        if r < T::lit(1e-12) * (T::one() + hull.diameter()) {
            return Err(AssemblyError::BadProblem("pushed atoms are too close to the image boundary".into()));
        }
    };
    let sigma_hull = image_bounds(&f.forward, omega);
    let lip_forward = lipschitz_bound(&f.forward, omega)?;
    let lip_inverse = lipschitz_bound(&f.inverse, &sigma_hull)?;
    let clear = omega.clearance(&preimage_box).into_iter().fold(T::infinity(), T::min);
    let boundary_distance = clear / lip_inverse;
    let budget = (p.eps * T::lit(0.5)).min(boundary_distance * T::lit(0.5));

    let dinv: Vec<Vec<ExprRef<T>>> = f
        .inverse
        .iter()
        .map(|c| (0..d).map(|k| c.partial(k)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let transported = Expr::product(Expr::compose(p.datum.clone(), f.inverse.clone()), det_expr(&dinv));

    let carrier = DiscreteCarrier {
        points: pushed.clone(),
        weights: cloud.weights.clone(),
        bundles,
    };
    let total = cloud.total_mass();
    let image_measure = ModelMeasure::new(
        image_box.clone(),
        vec![Piece {
            carrier: Carrier::Discrete(carrier),
            weight: total,
        }],
    )?;
    let image_cloud = AtomCloud {
        dim: d,
        points: pushed,
        weights: cloud.weights.clone(),
        piece: vec![0; cloud.len()],
        local: (0..cloud.len()).collect(),
        id: cloud.id.clone(),
        generation: vec![0],
    };
    let shifted = Expr::sub(transported.clone(), Expr::constant(T::one()));
    let mut inner = solve_cloud(&image_measure, image_cloud, &shifted, budget, p.delta, &p.options)?;
    inner.ledger.eps = p.eps.to_f64_lossy();

    let by_id: std::collections::HashMap<usize, usize> = cloud.id.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let positions: Vec<usize> = inner.k.id.iter().map(|id| by_id[id]).collect();
    let k = cloud.subset(&positions);
    let push = Pushforward {
        map: f.clone(),
        image_box,
        preimage_box,
        boundary_distance,
        lip_forward,
        lip_inverse,
        transported,
        budget,
    };
    Ok(finish(inner, p.datum.clone(), p.eps, p.delta, Some(push), k))
}
