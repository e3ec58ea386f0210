//! Divergence and Jacobian solutions assembled from per-direction scalar solves.

mod maps;

pub use maps::{perturb_diffeomorphism, solve_jacobian, Diffeomorphism, JacobianProblem, MapSolution, Pushforward};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Bump, DisjointSum, DisjointTerm, Expr, ExprRef, FieldError, Prim, ScalarField, SmoothClamp, VectorField};
use crate::geometry::{build_direction_net, Aabb, Cone, DirectionNet, GeometryError};
use crate::measures::{cone_null_certificate, sample_atoms, AtomCloud, Certificate, MeasureError, ModelMeasure};
use crate::scalar::Real;
use crate::scheme::{default_working_box, label_split, run_scheme, SchemeConfig, SchemeError, StageLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("group {group}: {source}")]
    Scheme { group: usize, source: SchemeError },
    #[error("{step} drops mass {needed}, budget is {budget}")]
    Budget { step: &'static str, needed: f64, budget: f64 },
    #[error("invalid problem: {0}")]
    BadProblem(String),
    #[error("map is not invertible at atom {atom}: {detail}")]
    NotInvertible { atom: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Sampling resolution handed to [`sample_atoms`].
    pub resolution: usize,
    pub max_stage: usize,
    /// Stopping tolerance of every scheme run, relative to `M`.
    pub residual_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            resolution: 1000,
            max_stage: 60,
            residual_tol: 5e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DivergenceProblem<T> {
    pub measure: ModelMeasure<T>,
    pub datum: ExprRef<T>,
    pub eps: T,
    pub delta: T,
    pub options: SolveOptions,
}

impl<T: Real> DivergenceProblem<T> {
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

pub(crate) fn check_budget<T: Real>(eps: T, delta: T, datum: &ExprRef<T>, d: usize) -> Result<(), AssemblyError> {
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(AssemblyError::BadProblem(format!("eps must be positive, got {eps}")));
    }
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(AssemblyError::BadProblem(format!("delta must be positive, got {delta}")));
    }
    if datum.arity() > d {
        return Err(AssemblyError::BadProblem(format!("datum uses x{} in dimension {d}", datum.arity())));
    }
    Ok(())
}

/// Smallest quarter-degree `alpha` with `c_alpha <= 1 + delta/2`, and `delta~ = ((1+delta)/c_alpha - 1)/2`,
/// so that `c_alpha (1 + delta~) < 1 + delta`.
pub fn pick_alpha_deltatilde<T: Real>(delta: T) -> (T, T) {
    let target = T::one() + delta * T::lit(0.5);
    let c = |a: T| T::one() + T::one() / a.tan();
    let quarter = T::PI() / T::lit(720.0);
    let right = T::FRAC_PI_2();
    let alpha = (4..360)
        .map(|i| quarter * T::lit(i as f64))
        .find(|&a| c(a) <= target)
        .unwrap_or_else(|| {
            let mut gap = quarter;
            loop {
                gap = gap * T::lit(0.5);
                if c(right - gap) <= target {
                    break right - gap;
                }
            }
        });
    let dt = ((T::one() + delta) / c(alpha) - T::one()) * T::lit(0.5);
    (alpha, dt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Cloud indices per net direction.
    pub groups: Vec<Vec<usize>>,
    pub dropped: Vec<usize>,
    pub dropped_mass: f64,
}

/// Certificates `[direction][piece]`.
pub type CertificateTable<T> = Vec<Vec<Option<Certificate<T>>>>;

pub fn certificate_table<T: Real>(measure: &ModelMeasure<T>, net: &DirectionNet<T>) -> CertificateTable<T> {
    (0..net.len())
        .into_par_iter()
        .map(|j| {
            let cone = net.cone(j);
            measure
                .pieces
                .iter()
                .map(|p| cone_null_certificate(&p.carrier, &cone).ok())
                .collect()
        })
        .collect()
}

/// Sends each atom to the first direction whose cone is transverse to its bundle
/// and along which its piece is certified.
pub fn partition_by_direction<T: Real>(
    cloud: &AtomCloud<T>,
    measure: &ModelMeasure<T>,
    net: &DirectionNet<T>,
    certs: &CertificateTable<T>,
    budget: T,
) -> Result<Partition, AssemblyError> {
    let cones: Vec<Cone<T>> = (0..net.len()).map(|j| net.cone(j)).collect();
    let choice: Vec<Option<usize>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let b = cloud.bundle(measure, i);
            let p = cloud.piece[i];
            (0..cones.len()).find(|&j| certs[j][p].is_some() && b.transverse_to(&cones[j]))
        })
        .collect();
    let mut groups = vec![Vec::new(); net.len()];
    let mut dropped = Vec::new();
    for (i, c) in choice.into_iter().enumerate() {
        match c {
            Some(j) => groups[j].push(i),
            None => dropped.push(i),
        }
    }
    let mass = dropped.iter().fold(T::zero(), |acc, &i| acc + cloud.weights[i]);
    if !dropped.is_empty() && mass >= budget {
        return Err(AssemblyError::Budget {
            step: "partition",
            needed: mass.to_f64_lossy(),
            budget: budget.to_f64_lossy(),
        });
    }
    Ok(Partition {
        groups,
        dropped: dropped.iter().map(|&i| cloud.id[i]).collect(),
        dropped_mass: mass.to_f64_lossy(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LocalGroup<T> {
    pub net_index: usize,
    /// Cloud indices.
    pub atoms: Vec<usize>,
    /// Separated parts as positions into `atoms`, with their margins.
    pub parts: Vec<(Vec<usize>, T)>,
    pub hulls: Vec<Aabb<T>>,
    /// `U_j`, one box per part.
    pub boxes: Vec<Aabb<T>>,
    /// `psi_j`: equal to 1 on every hull, supported in the boxes.
    pub cutoff: ExprRef<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Localization<T> {
    pub groups: Vec<LocalGroup<T>>,
    pub working_box: Option<Aabb<T>>,
    /// Cloud ids.
    pub dropped: Vec<usize>,
    pub dropped_mass: f64,
}

/// Separates the groups by axis splits and builds disjoint boxes and cutoffs inside `omega`.
pub fn localize<T: Real>(
    cloud: &AtomCloud<T>,
    partition: &Partition,
    omega: &Aabb<T>,
    budget: T,
) -> Result<Localization<T>, AssemblyError> {
    let mut labels = vec![usize::MAX; cloud.len()];
    let mut atoms = Vec::new();
    for (j, g) in partition.groups.iter().enumerate() {
        for &i in g {
            labels[i] = j;
            atoms.push(i);
        }
    }
    atoms.sort_unstable();
    let floor = T::lit(1e-9) * omega.diameter();
    let split = label_split(&cloud.points, &cloud.weights, &labels, atoms, T::infinity(), floor);
    let mass = split.dropped.iter().fold(T::zero(), |acc, &i| acc + cloud.weights[i]);
    if !split.dropped.is_empty() && mass >= budget {
        return Err(AssemblyError::Budget {
            step: "separation",
            needed: mass.to_f64_lossy(),
            budget: budget.to_f64_lossy(),
        });
    }
    let kept: Vec<usize> = split.leaves.iter().flat_map(|l| l.atoms.iter().copied()).collect();
    let working_box = if kept.is_empty() {
        None
    } else {
        let sub = cloud.subset(&kept);
        Some(default_working_box(&sub, omega).ok_or_else(|| AssemblyError::BadProblem("atoms touch the boundary of omega".into()))?)
    };
    let mut groups: Vec<LocalGroup<T>> = Vec::new();
    let mut bumps: Vec<Vec<Bump<T>>> = Vec::new();
    for leaf in split.leaves {
        let w = working_box.as_ref().expect("leaves imply a working box");
        let j = labels[leaf.atoms[0]];
        let hull = Aabb::hull(leaf.atoms.iter().map(|&i| cloud.points[i].as_slice())).expect("nonempty leaf");
        let clear = w.clearance(&hull);
        let o: Vec<T> = clear.iter().map(|&c| (leaf.margin * T::lit(1.0 / 3.0)).min(c)).collect();
        let half: Vec<T> = o.iter().map(|&v| v * T::lit(0.5)).collect();
        let outer = hull.inflate(&o);
        let inner = hull.inflate(&half);
        let pos = groups.iter().position(|g| g.net_index == j).unwrap_or_else(|| {
            groups.push(LocalGroup {
                net_index: j,
                atoms: Vec::new(),
                parts: Vec::new(),
                hulls: Vec::new(),
                boxes: Vec::new(),
                cutoff: Expr::zero(),
            });
            bumps.push(Vec::new());
            groups.len() - 1
        });
        let g = &mut groups[pos];
        let start = g.atoms.len();
        g.atoms.extend(leaf.atoms.iter().copied());
        g.parts.push(((start..g.atoms.len()).collect(), leaf.margin));
        g.hulls.push(hull);
        g.boxes.push(outer.clone());
        bumps[pos].push(Bump::new(outer, inner)?);
    }
    for (g, bs) in groups.iter_mut().zip(bumps) {
        let terms = bs.into_iter().map(|b| DisjointTerm::new(b.outer.clone(), Expr::bump(b))).collect();
        g.cutoff = Arc::new(Expr::Disjoint {
            sum: DisjointSum::new(cloud.dim, terms)?,
        });
    }
    groups.sort_by_key(|g| g.net_index);
    Ok(Localization {
        groups,
        working_box,
        dropped: split.dropped.iter().map(|&i| cloud.id[i]).collect(),
        dropped_mass: mass.to_f64_lossy(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerPart {
    pub budget: f64,
    pub dropped_mass: f64,
    /// Atom ids.
    pub dropped_ids: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    pub eps: f64,
    pub partition: LedgerPart,
    pub separation: LedgerPart,
    pub groups: Vec<LedgerPart>,
    pub total_dropped: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GroupSolution<T> {
    pub net_index: usize,
    pub direction: Vec<T>,
    pub boxes: Vec<Aabb<T>>,
    pub hulls: Vec<Aabb<T>>,
    pub cutoff: ExprRef<T>,
    /// `lambda_j = psi_j * clamp(f)`.
    pub datum: ExprRef<T>,
    pub eta: T,
    pub u: ExprRef<T>,
    pub stage_fields: Vec<ExprRef<T>>,
    pub stages: Vec<StageLog>,
    pub t: T,
    pub tau: T,
    pub m: T,
    pub stages_run: usize,
    pub residual_bound: T,
    pub certified_grad_bound: T,
    pub certified_sup_bound: T,
    pub truncated: bool,
    /// Positions into the solution's `k`.
    pub atoms: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Solution<T> {
    /// The constructed field `Z = sum_j u_j v_j`.
    pub field: VectorField<T>,
    /// `W` when solving around a background field; the full solution is `W + Z`.
    pub background: Option<VectorField<T>>,
    /// What `div Z` matches on `k`.
    pub datum: ExprRef<T>,
    pub omega: Aabb<T>,
    pub working_box: Option<Aabb<T>>,
    /// Every sampled atom.
    pub atoms: AtomCloud<T>,
    pub k: AtomCloud<T>,
    pub k_group: Vec<usize>,
    /// Final scheme residual per atom of `k`.
    pub residuals: Vec<T>,
    pub m: T,
    pub eps: T,
    pub delta: T,
    pub alpha: T,
    pub delta_tilde: T,
    pub residual_tol: T,
    pub net: DirectionNet<T>,
    pub groups: Vec<GroupSolution<T>>,
    pub ledger: MassLedger,
    pub certified_lip: T,
    pub certified_sup: T,
}

impl<T: Real> Solution<T> {
    /// `W + Z`.
    pub fn total(&self) -> VectorField<T> {
        let mut v = self.background.clone().unwrap_or_else(|| VectorField::zero(self.field.dim));
        v.extend(&self.field);
        v
    }
}

/// Full pipeline on an already sampled cloud.
pub(crate) fn solve_cloud<T: Real>(
    measure: &ModelMeasure<T>,
    cloud: AtomCloud<T>,
    datum: &ExprRef<T>,
    eps: T,
    delta: T,
    options: &SolveOptions,
) -> Result<Solution<T>, AssemblyError> {
    let d = measure.dim();
    check_budget(eps, delta, datum, d)?;
    let (alpha, delta_tilde) = pick_alpha_deltatilde(delta);
    let net = build_direction_net(d, alpha)?;
    let certs = certificate_table(measure, &net);
    let third = eps / T::lit(3.0);
    let partition = partition_by_direction(&cloud, measure, &net, &certs, third)?;
    let local = localize(&cloud, &partition, &measure.omega, third)?;

    let kept: Vec<usize> = local.groups.iter().flat_map(|g| g.atoms.iter().copied()).collect();
    let m = kept.iter().fold(T::zero(), |acc, &i| acc.max(datum.value(&cloud.points[i]).abs()));
    let clamped = if m > T::zero() {
        Expr::apply(
            Prim::Clamp {
                clamp: SmoothClamp::new(m, m * T::lit(1e-3))?,
            },
            datum.clone(),
        )
    } else {
        Expr::zero()
    };
    let n_groups = local.groups.len().max(1);
    let eta = eps / T::lit(3.0 * n_groups as f64);
    let tol = T::lit(options.residual_tol) * m;

    let runs = local
        .groups
        .par_iter()
        .map(|g| {
            let lambda = if m > T::zero() {
                Expr::product(g.cutoff.clone(), clamped.clone())
            } else {
                Expr::zero()
            };
            let sub = cloud.subset(&g.atoms);
            let mut cfg = SchemeConfig::new(eta, delta_tilde, local.working_box.clone().expect("groups imply a box"));
            cfg.max_stage = options.max_stage;
            cfg.residual_tol = Some(tol);
            cfg.parts = Some(g.parts.clone());
            cfg.lip_boxes = Some(g.hulls.clone());
            let cone = net.cone(g.net_index);
            let r = run_scheme(&sub, &certs[g.net_index], &cone, &lambda, &cfg).map_err(|source| AssemblyError::Scheme {
                group: g.net_index,
                source,
            })?;
            Ok((lambda, r))
        })
        .collect::<Result<Vec<_>, AssemblyError>>()?;

    let mut field = VectorField::zero(d);
    let mut k_group = Vec::new();
    let mut residuals = Vec::new();
    let mut groups = Vec::new();
    let mut k_all = AtomCloud {
        dim: d,
        generation: cloud.generation.clone(),
        ..AtomCloud::default()
    };
    let mut group_ledger = Vec::new();
    for (gi, (g, (lambda, r))) in local.groups.iter().zip(runs).enumerate() {
        let v = net.directions[g.net_index].as_slice().to_vec();
        field.push(ScalarField::new(r.u.clone()), v.clone());
        let start = k_all.len();
        k_all.points.extend(r.kept.points.iter().cloned());
        k_all.weights.extend(r.kept.weights.iter().copied());
        k_all.piece.extend(r.kept.piece.iter().copied());
        k_all.local.extend(r.kept.local.iter().copied());
        k_all.id.extend(r.kept.id.iter().copied());
        k_group.extend(std::iter::repeat_n(gi, r.kept.len()));
        residuals.extend(r.residual.iter().copied());
        let ids: Vec<usize> = r.stages.iter().flat_map(|s| s.dropped_ids.iter().copied()).collect();
        group_ledger.push(LedgerPart {
            budget: eta.to_f64_lossy(),
            dropped_mass: r.dropped_mass.to_f64_lossy(),
            dropped_ids: ids,
        });
        groups.push(GroupSolution {
            net_index: g.net_index,
            direction: v,
            boxes: g.boxes.clone(),
            hulls: g.hulls.clone(),
            cutoff: g.cutoff.clone(),
            datum: lambda,
            eta,
            u: r.u,
            stage_fields: r.stage_fields,
            stages: r.stages,
            t: r.t,
            tau: r.tau,
            m: r.m,
            stages_run: r.stages_run,
            residual_bound: r.residual_bound,
            certified_grad_bound: r.certified_grad_bound,
            certified_sup_bound: r.certified_sup_bound,
            truncated: r.truncated,
            atoms: (start..k_all.len()).collect(),
        });
    }
    let certified_lip = groups.iter().fold(T::zero(), |acc, g| acc.max(g.certified_grad_bound));
    let certified_sup = groups.iter().fold(T::zero(), |acc, g| acc.max(g.certified_sup_bound));
    let mut ledger = MassLedger {
        eps: eps.to_f64_lossy(),
        partition: LedgerPart {
            budget: third.to_f64_lossy(),
            dropped_mass: partition.dropped_mass,
            dropped_ids: partition.dropped.clone(),
        },
        separation: LedgerPart {
            budget: third.to_f64_lossy(),
            dropped_mass: local.dropped_mass,
            dropped_ids: local.dropped.clone(),
        },
        groups: group_ledger,
        total_dropped: 0.0,
    };
    ledger.total_dropped =
        ledger.partition.dropped_mass + ledger.separation.dropped_mass + ledger.groups.iter().map(|g| g.dropped_mass).sum::<f64>();
    Ok(Solution {
        field,
        background: None,
        datum: datum.clone(),
        omega: measure.omega.clone(),
        working_box: local.working_box,
        atoms: cloud,
        k: k_all,
        k_group,
        residuals,
        m,
        eps,
        delta,
        alpha,
        delta_tilde,
        residual_tol: tol,
        net,
        groups,
        ledger,
        certified_lip,
        certified_sup,
    })
}

/// `V` with `div V = f` on a retained sub-cloud `K` of mass at least `mu(Omega) - eps`.
pub fn solve_divergence<T: Real>(p: &DivergenceProblem<T>) -> Result<Solution<T>, AssemblyError> {
    check_budget(p.eps, p.delta, &p.datum, p.measure.dim())?;
    let cloud = sample_atoms(&p.measure, p.options.resolution)?;
    solve_cloud(&p.measure, cloud, &p.datum, p.eps, p.delta, &p.options)
}

/// Symbolic `div W`.
pub fn divergence_expr<T: Real>(w: &VectorField<T>) -> Result<ExprRef<T>, AssemblyError> {
    let mut parts = Vec::new();
    for t in &w.terms {
        if t.scalar.support.is_some() {
            return Err(AssemblyError::BadProblem("background terms must be globally defined".into()));
        }
        for (k, &c) in t.direction.iter().enumerate() {
            if c != T::zero() {
                parts.push(Expr::scale(c, t.scalar.expr.partial(k)?));
            }
        }
    }
    Ok(Expr::sum(parts))
}

/// `V = W + Z` with `div V = f` on `K` and `|Z| <= eps`.
pub fn perturb_background<T: Real>(w: &VectorField<T>, p: &DivergenceProblem<T>) -> Result<Solution<T>, AssemblyError> {
    if w.dim != p.measure.dim() {
        return Err(AssemblyError::BadProblem(format!("background has dimension {}", w.dim)));
    }
    let datum = Expr::sub(p.datum.clone(), divergence_expr(w)?);
    let q = DivergenceProblem { datum, ..p.clone() };
    let mut s = solve_divergence(&q)?;
    s.background = Some(w.clone());
    Ok(s)
}

#[cfg(test)]
mod tests;
