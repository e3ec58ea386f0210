//! Iterative residual correction: builds `u` with `d_e u = lambda` on a retained sub-cloud.

mod cluster;

pub use cluster::{greedy_cover_partition, label_split, Leaf, SplitOutcome};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Bump, DisjointSum, DisjointTerm, Expr, ExprRef, FieldError};
use crate::geometry::{Aabb, Cone};
use crate::measures::{AtomCloud, Certificate};
use crate::scalar::Real;
use crate::width::{self, WidthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("stage {stage}: separation must drop mass {needed}, budget is {budget}")]
    Budget { stage: usize, needed: f64, budget: f64 },
    #[error("stage {stage}: {source}")]
    Width { stage: usize, source: WidthError },
    #[error("no certificate for piece {0} along this cone")]
    MissingCertificate(usize),
    #[error("stage {stage}: cluster box has no room inside the working box")]
    NoRoom { stage: usize },
    #[error("datum has no finite Lipschitz certificate on the working box")]
    NotLipschitz,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn t_inequality<T: Real>(t: T) -> T {
    T::one() / (T::one() - t) + t.powi(4) / (T::one() - t * t)
}

/// Largest `t` on `0.49, 0.48, ..., 0.01` with `1/(1-t) + t^4/(1-t^2) < 1 + min(delta, eta)`,
/// halving below `0.01` when the slack is smaller than the grid allows.
pub fn choose_t<T: Real>(delta: T, eta: T) -> T {
    let slack = T::one() + delta.min(eta);
    for i in (1..=49).rev() {
        let t = T::lit(i as f64 / 100.0);
        if t_inequality(t) < slack {
            return t;
        }
    }
    let mut t = T::lit(0.005);
    while t_inequality(t) >= slack && t > T::min_positive_value() {
        t = t * T::lit(0.5);
    }
    t
}

/// `rho = bound / Lip(lambda)` over `working_box`; a constant datum gets the box diameter.
pub fn modulus_radius<T: Real>(lambda: &ExprRef<T>, working_box: &Aabb<T>, bound: T) -> Result<T, SchemeError> {
    let lip = lambda.grad_bound(working_box);
    if !lip.is_finite() {
        return Err(SchemeError::NotLipschitz);
    }
    if lip <= T::zero() {
        return Ok(working_box.diameter());
    }
    Ok(bound / lip)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Cluster<T> {
    /// Positions into the scheme's initial cloud.
    pub atoms: Vec<usize>,
    pub margin: T,
    pub outer: Aabb<T>,
    pub inner: Aabb<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Separation<T> {
    pub clusters: Vec<Cluster<T>>,
    pub dropped: Vec<usize>,
    pub dropped_mass: T,
}

#[allow(clippy::too_many_arguments)]
/// Splits each parent `(atoms, margin)` into label-pure clusters with disjoint boxes
/// inside `working_box`, dropping near-coincident cross-label atoms within `budget`.
pub fn refine_and_separate<T: Real>(
    points: &[Vec<T>],
    weights: &[T],
    labels: &[usize],
    parents: Vec<(Vec<usize>, T)>,
    working_box: &Aabb<T>,
    floor: T,
    budget: T,
    stage: usize,
) -> Result<Separation<T>, SchemeError> {
    let parts: Vec<cluster::SplitOutcome<T>> = parents
        .into_par_iter()
        .map(|(atoms, m)| cluster::label_split(points, weights, labels, atoms, m, floor))
        .collect();
    let mut dropped = Vec::new();
    let mut leaves = Vec::new();
    for p in parts {
        dropped.extend(p.dropped);
        leaves.extend(p.leaves);
    }
    dropped.sort_unstable();
    let dropped_mass = dropped.iter().fold(T::zero(), |acc, &i| acc + weights[i]);
    if !dropped.is_empty() && dropped_mass >= budget {
        return Err(SchemeError::Budget {
            stage,
            needed: dropped_mass.to_f64_lossy(),
            budget: budget.to_f64_lossy(),
        });
    }
    let third = T::lit(1.0 / 3.0);
    let half = T::lit(0.5);
    let clusters = leaves
        .into_iter()
        .map(|l| {
            let bbox = Aabb::hull(l.atoms.iter().map(|&i| points[i].as_slice())).expect("nonempty leaf");
            let clear = working_box.clearance(&bbox);
            let o: Vec<T> = clear.iter().map(|&c| (l.margin * third).min(c * half)).collect();
            if o.iter().any(|&v| !(v > T::zero())) {
                return Err(SchemeError::NoRoom { stage });
            }
            let inner_pad: Vec<T> = o.iter().map(|&v| v * half).collect();
            Ok(Cluster {
                outer: bbox.inflate(&o),
                inner: bbox.inflate(&inner_pad),
                atoms: l.atoms,
                margin: l.margin,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Separation {
        clusters,
        dropped,
        dropped_mass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SchemeConfig<T> {
    pub eta: T,
    pub delta: T,
    pub working_box: Aabb<T>,
    pub max_stage: usize,
    /// Absolute stopping tolerance; `1e-9 * M` when absent.
    pub residual_tol: Option<T>,
    /// Overrides [`choose_t`].
    pub t: Option<T>,
    /// Initial separated parts `(atoms, margin)`; the whole cloud when absent.
    #[serde(default)]
    pub parts: Option<Vec<(Vec<usize>, T)>>,
    /// Boxes on which the Lipschitz bound of the datum is taken; the working box when absent.
    #[serde(default)]
    pub lip_boxes: Option<Vec<Aabb<T>>>,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(eta: T, delta: T, working_box: Aabb<T>) -> Self {
        Self {
            eta,
            delta,
            working_box,
            max_stage: 60,
            residual_tol: None,
            t: None,
            parts: None,
            lip_boxes: None,
        }
    }
}

/// Working box of the scheme: bounding box of the cloud inflated by 10% of its diameter, clipped to `u`.
pub fn default_working_box<T: Real>(cloud: &AtomCloud<T>, u: &Aabb<T>) -> Option<Aabb<T>> {
    let b = cloud.bbox()?;
    let grown = b.inflate_uniform(T::lit(0.1) * b.diameter().max(T::lit(1e-6)));
    let clear = u.clearance(&b);
    let capped: Vec<T> = clear.iter().map(|&c| c * T::lit(0.5)).collect();
    let limit = b.inflate(&capped);
    grown.intersection(&limit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub index: usize,
    pub rho: f64,
    pub clusters: usize,
    pub terms: usize,
    pub zeta: f64,
    pub max_cutoff_slope: f64,
    /// `t^n M`, the bound the residual on `K_n` must respect.
    pub residual_law: f64,
    /// `max |r_n|` over `K_n`.
    pub residual_max: f64,
    pub dropped_mass: f64,
    pub drop_budget: f64,
    pub grad_bound: f64,
    pub grad_law: f64,
    pub sup_bound: f64,
    pub sup_law: f64,
    /// Smallest feature length among the stage terms; `None` for an empty stage.
    pub feature_scale: Option<f64>,
    pub dropped_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SchemeResult<T> {
    pub u: ExprRef<T>,
    pub stage_fields: Vec<ExprRef<T>>,
    pub kept: AtomCloud<T>,
    /// Final residual `r_N` at the kept atoms.
    pub residual: Vec<T>,
    pub m: T,
    pub t: T,
    pub tau: T,
    pub c_alpha: T,
    pub stages_run: usize,
    /// `max |r_N|` over the kept atoms.
    pub final_residual_max: f64,
    pub residual_bound: T,
    pub certified_grad_bound: T,
    pub certified_sup_bound: T,
    pub initial_drop: T,
    pub dropped_mass: T,
    pub truncated: bool,
    pub stages: Vec<StageLog>,
}

struct StageOutput<T> {
    field: Option<ExprRef<T>>,
    clusters: Vec<Cluster<T>>,
    log: StageLog,
}

#[allow(clippy::too_many_arguments)]
fn build_stage<T: Real>(
    n: usize,
    cloud: &AtomCloud<T>,
    alive: &[usize],
    residual: &[T],
    parents: Vec<(Vec<usize>, T)>,
    certs: &[Option<Certificate<T>>],
    cone: &Cone<T>,
    cfg: &SchemeConfig<T>,
    lip: T,
    m: T,
    t: T,
    tau: T,
    floor: T,
) -> Result<StageOutput<T>, SchemeError> {
    let d = cloud.dim;
    let tn = t.powi(n as i32);
    let law = tn * m;
    let rho = if lip > T::zero() {
        t * law / lip
    } else {
        cfg.working_box.diameter()
    };
    let residual_max = alive.iter().fold(T::zero(), |acc, &i| acc.max(residual[i].abs()));

    // greedy covers inside every parent, one per piece
    let covers: Vec<Vec<Vec<usize>>> = parents
        .par_iter()
        .map(|(atoms, _)| {
            let mut by_piece: Vec<(usize, Vec<usize>)> = Vec::new();
            for &i in atoms {
                match by_piece.iter_mut().find(|(p, _)| *p == cloud.piece[i]) {
                    Some((_, v)) => v.push(i),
                    None => by_piece.push((cloud.piece[i], vec![i])),
                }
            }
            let mut out = Vec::new();
            for (_, members) in by_piece {
                let pts: Vec<&[T]> = members.iter().map(|&i| cloud.points[i].as_slice()).collect();
                let b = Aabb::hull(pts.iter().copied()).expect("nonempty");
                if b.diameter() <= rho * T::lit(0.5) {
                    out.push(members);
                } else {
                    for c in greedy_cover_partition(&pts, rho) {
                        out.push(c.into_iter().map(|j| members[j]).collect());
                    }
                }
            }
            out
        })
        .collect();
    let mut labels = vec![usize::MAX; cloud.len()];
    let mut next = 0;
    for parent in &covers {
        for c in parent {
            for &i in c {
                labels[i] = next;
            }
            next += 1;
        }
    }
    let budget = cfg.eta / T::lit(2f64.powi(n as i32 + 2));
    let sep = refine_and_separate(&cloud.points, &cloud.weights, &labels, parents, &cfg.working_box, floor, budget, n)?;

    let anchors: Vec<usize> = sep
        .clusters
        .iter()
        .map(|c| {
            let mut best = c.atoms[0];
            for &i in &c.atoms {
                if cloud.weights[i] > cloud.weights[best] || cloud.weights[i] == cloud.weights[best] && i < best {
                    best = i;
                }
            }
            best
        })
        .collect();
    let bumps: Vec<Bump<T>> = sep
        .clusters
        .iter()
        .map(|c| Bump::new(c.outer.clone(), c.inner.clone()))
        .collect::<Result<_, _>>()?;
    let active: Vec<usize> = (0..sep.clusters.len()).filter(|&i| residual[anchors[i]] != T::zero()).collect();
    let max_dchi = active.iter().fold(T::zero(), |acc, &i| acc.max(bumps[i].grad_norm_bound()));
    let zeta = tau * t.powi(n as i32 + 4) / (T::one() + max_dchi);

    let built: Vec<(DisjointTerm<T>, T, T)> = active
        .par_iter()
        .map(|&ci| {
            let c = &sep.clusters[ci];
            let piece = cloud.piece[c.atoms[0]];
            let cert = certs
                .get(piece)
                .and_then(Option::as_ref)
                .ok_or(SchemeError::MissingCertificate(piece))?;
            let pts: Vec<&[T]> = c.atoms.iter().map(|&i| cloud.points[i].as_slice()).collect();
            let locals: Vec<usize> = c.atoms.iter().map(|&i| cloud.local[i]).collect();
            let generation = cloud.generation.get(piece).copied().unwrap_or(0);
            let anchor = &cloud.points[anchors[ci]];
            let w =
                width::build(cert, &pts, &locals, generation, anchor, zeta).map_err(|source| SchemeError::Width { stage: n, source })?;
            let a = residual[anchors[ci]];
            let expr = Expr::scale(a, Expr::product(Expr::bump(bumps[ci].clone()), w.phi));
            let grad = a.abs() * (w.grad_bound + zeta * bumps[ci].grad_norm_bound());
            let sup = a.abs() * zeta;
            Ok((DisjointTerm::new(c.outer.clone(), expr), grad, sup))
        })
        .collect::<Result<Vec<_>, SchemeError>>()?;
    let grad_bound = built.iter().fold(T::zero(), |acc, b| acc.max(b.1));
    let sup_bound = built.iter().fold(T::zero(), |acc, b| acc.max(b.2));
    let terms: Vec<DisjointTerm<T>> = built.into_iter().map(|b| b.0).collect();
    let n_terms = terms.len();
    let field = if terms.is_empty() {
        None
    } else {
        let sum = DisjointSum::new(d, terms)?;
        Some(std::sync::Arc::new(Expr::Disjoint { sum }))
    };
    let feature_scale = field.as_ref().map(|f| f.feature_scale().to_f64_lossy());
    let c_alpha = cone.c_alpha();
    let log = StageLog {
        index: n,
        rho: rho.to_f64_lossy(),
        clusters: sep.clusters.len(),
        terms: n_terms,
        zeta: zeta.to_f64_lossy(),
        max_cutoff_slope: max_dchi.to_f64_lossy(),
        residual_law: law.to_f64_lossy(),
        residual_max: residual_max.to_f64_lossy(),
        dropped_mass: sep.dropped_mass.to_f64_lossy(),
        drop_budget: budget.to_f64_lossy(),
        grad_bound: grad_bound.to_f64_lossy(),
        grad_law: (law * (c_alpha + t.powi(n as i32 + 4))).to_f64_lossy(),
        sup_bound: sup_bound.to_f64_lossy(),
        sup_law: (tau * t.powi(2 * n as i32 + 4) * m).to_f64_lossy(),
        feature_scale,
        dropped_ids: sep.dropped.iter().map(|&i| cloud.id[i]).collect(),
    };
    Ok(StageOutput {
        field,
        clusters: sep.clusters,
        log,
    })
}

/// Runs the scheme on `nu` along the axis `e` of `cone` for the datum `lambda`.
///
/// `certs[p]` is the cone-null certificate of piece `p`.
pub fn run_scheme<T: Real>(
    nu: &AtomCloud<T>,
    certs: &[Option<Certificate<T>>],
    cone: &Cone<T>,
    lambda: &ExprRef<T>,
    cfg: &SchemeConfig<T>,
) -> Result<SchemeResult<T>, SchemeError> {
    if !(cfg.eta > T::zero() && cfg.delta > T::zero()) {
        return Err(SchemeError::BadParameter("eta and delta must be positive".into()));
    }
    let e = cone.axis.as_slice().to_vec();
    let c_alpha = cone.c_alpha();
    let values: Vec<T> = nu.points.par_iter().map(|p| lambda.value(p)).collect();
    let m = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let t = cfg.t.unwrap_or_else(|| choose_t(cfg.delta, cfg.eta));
    let tau = if m > T::zero() {
        T::one().min(cfg.delta / m).min(cfg.eta / m)
    } else {
        T::one()
    };
    if nu.points.iter().any(|p| !cfg.working_box.contains_strictly(p)) {
        return Err(SchemeError::BadParameter("cloud is not inside the working box".into()));
    }
    let trivial = |kept: AtomCloud<T>| SchemeResult {
        u: Expr::zero(),
        stage_fields: Vec::new(),
        residual: vec![T::zero(); kept.len()],
        kept,
        m,
        t,
        tau,
        c_alpha,
        stages_run: 0,
        final_residual_max: 0.0,
        residual_bound: T::zero(),
        certified_grad_bound: T::zero(),
        certified_sup_bound: T::zero(),
        initial_drop: T::zero(),
        dropped_mass: T::zero(),
        truncated: false,
        stages: Vec::new(),
    };
    if m == T::zero() || nu.is_empty() {
        return Ok(trivial(nu.clone()));
    }
    let tol = cfg.residual_tol.unwrap_or(T::lit(5e-10) * m);
    let lip = match &cfg.lip_boxes {
        Some(bs) => bs.iter().fold(T::zero(), |acc, b| acc.max(lambda.grad_bound(b))),
        None => lambda.grad_bound(&cfg.working_box),
    };
    if !lip.is_finite() {
        return Err(SchemeError::NotLipschitz);
    }
    let floor = T::lit(1e-9) * cfg.working_box.diameter();

    let mut residual = values;
    let mut parents: Vec<(Vec<usize>, T)> = match &cfg.parts {
        Some(p) => p.clone(),
        None => vec![((0..nu.len()).collect(), T::infinity())],
    };
    let mut alive: Vec<usize> = parents.iter().flat_map(|p| p.0.iter().copied()).collect();
    alive.sort_unstable();
    let mut fields = Vec::new();
    let mut logs = Vec::new();
    let mut dropped_mass = T::zero();
    let mut grad_total = T::zero();
    let mut sup_total = T::zero();
    let mut n = 0;
    while t.powi(n as i32) * m > tol && n < cfg.max_stage {
        let out = build_stage(n, nu, &alive, &residual, parents, certs, cone, cfg, lip, m, t, tau, floor)?;
        dropped_mass = dropped_mass + T::lit(out.log.dropped_mass);
        grad_total = grad_total + T::lit(out.log.grad_bound);
        sup_total = sup_total + T::lit(out.log.sup_bound);
        alive = {
            let mut a: Vec<usize> = out.clusters.iter().flat_map(|c| c.atoms.iter().copied()).collect();
            a.sort_unstable();
            a
        };
        if let Some(f) = &out.field {
            let upd: Vec<(usize, T)> = alive
                .par_iter()
                .map(|&i| {
                    let g = f.grad(&nu.points[i]);
                    let de = g.iter().zip(&e).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
                    (i, residual[i] - de)
                })
                .collect();
            for (i, r) in upd {
                residual[i] = r;
            }
            fields.push(f.clone());
        }
        parents = out.clusters.into_iter().map(|c| (c.atoms, c.margin)).collect();
        logs.push(out.log);
        n += 1;
    }
    let kept = nu.subset(&alive);
    let final_residual: Vec<T> = alive.iter().map(|&i| residual[i]).collect();
    let residual_bound = t.powi(n as i32) * m;
    Ok(SchemeResult {
        u: Expr::sum(fields.clone()),
        stage_fields: fields,
        kept,
        residual: final_residual.clone(),
        m,
        t,
        tau,
        c_alpha,
        stages_run: n,
        final_residual_max: final_residual.iter().fold(T::zero(), |acc, r| acc.max(r.abs())).to_f64_lossy(),
        residual_bound,
        certified_grad_bound: grad_total,
        certified_sup_bound: sup_total,
        initial_drop: T::zero(),
        dropped_mass,
        truncated: residual_bound > tol,
        stages: logs,
    })
}
