//! Independent checks of constructed solutions: exact and finite-difference identities,
//! dense-grid and random-pair norms, mass ledgers and determinant oracles.

mod corrupt;
mod sampling;

pub use corrupt::{corrupt_map, corrupt_solution, Corruption, MapCorruption};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::assembly::{DivergenceProblem, JacobianProblem, MapSolution, Solution};
use crate::fields::{central_directional, central_gradient, Expr, ExprRef, VectorField};
use crate::geometry::Aabb;
use crate::linalg::{det, rank_one_update};
use crate::report::{Check, Report, Worst};
use crate::scalar::Real;

pub const FD_TOLERANCE: f64 = 1e-4;
pub const FD_MAX_STEP: f64 = 1e-5;
pub const LIP_PAIRS: usize = 100_000;
pub const INJECTIVITY_PAIRS: usize = 10_000;
const NEAR_POINTS: usize = 20_000;
const LEDGER_TOLERANCE: f64 = 1e-12;
const MIN_PAIR_SCALE: f64 = 1e-7;
/// Oracle step relative to the feature scale; profiles are C1 so the error is first order at their knots.
const ORACLE_STEP: f64 = 1e-7;

fn to64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}

fn from64<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

fn norm64(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Maximum of `f` over `pts`, leftmost on ties.
fn worst_over<P: Sync, F>(pts: &[P], witness: impl Fn(&P) -> Vec<f64> + Sync, f: F) -> Worst
where
    F: Fn(&P) -> f64 + Sync,
{
    let vals: Vec<f64> = pts.par_iter().map(&f).collect();
    let mut w = Worst::new();
    for (p, v) in pts.iter().zip(vals) {
        if v > w.value || v.is_nan() && !w.value.is_nan() {
            w.see(v, &witness(p));
        }
    }
    w
}

/// The `n^d` grid of `region`, the anchors themselves, and points scattered around them.
fn dense_points(rng: &mut ChaCha8Rng, region: &Aabb<f64>, anchors: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut pts = region.grid(n, false);
    pts.extend(anchors.iter().cloned());
    let near = sampling::points(rng, region, anchors, NEAR_POINTS, MIN_PAIR_SCALE);
    pts.extend(near.into_iter().filter(|x| region.contains(x)));
    pts
}

fn check_max(name: &str, w: Worst, limit: f64) -> Check {
    Check::at_most(name, w.value_or_zero(), limit, w.at)
}

/// Central-difference step for a field whose smallest feature is `feature`.
pub fn fd_step(feature: f64) -> f64 {
    FD_MAX_STEP.min(feature / 8.0)
}

/// Directional derivative of `sum_n stage_n` along `v`, each stage differenced with its own step.
fn staged_directional<T: Real>(stages: &[(ExprRef<T>, T)], x: &[T], v: &[T]) -> T {
    stages
        .iter()
        .fold(T::zero(), |acc, (f, h)| acc + central_directional(|p| f.value(p), x, v, *h))
}

/// Per group: stage fields with their difference steps, and the group direction.
type Staged<T> = Vec<(Vec<(ExprRef<T>, T)>, Vec<T>)>;

fn staged_fields<T: Real>(sol: &Solution<T>) -> Staged<T> {
    sol.groups
        .iter()
        .map(|g| {
            let st = g
                .stage_fields
                .iter()
                .map(|f| (f.clone(), T::lit(fd_step(f.feature_scale().to_f64_lossy()))))
                .collect();
            (st, g.direction.clone())
        })
        .collect()
}

/// `div(W + Z)(x)` by central differences.
fn fd_divergence<T: Real>(sol: &Solution<T>, staged: &Staged<T>, x: &[T]) -> T {
    let z = staged.iter().fold(T::zero(), |acc, (st, v)| acc + staged_directional(st, x, v));
    let w = sol.background.as_ref().map_or(T::zero(), |w| {
        w.terms.iter().fold(T::zero(), |acc, t| {
            acc + central_directional(|p| t.scalar.eval(p), x, &t.direction, T::lit(FD_MAX_STEP))
        })
    });
    z + w
}

/// `sum_j |grad u_j(x)|`, the operator norm of `DZ(x)` wherever one group is active.
fn jacobian_norm<T: Real>(sol: &Solution<T>, x: &[T]) -> f64 {
    sol.groups
        .iter()
        .map(|g| norm64(&to64(&g.u.grad(x))) * norm64(&to64(&g.direction)))
        .sum()
}

fn empirical_lipschitz(pairs: &[(Vec<f64>, Vec<f64>)], f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Worst {
    worst_over(
        pairs,
        |p| p.0.clone(),
        |(x, y)| {
            let fx = f(x);
            let fy = f(y);
            let num = norm64(&fx.iter().zip(&fy).map(|(a, b)| a - b).collect::<Vec<_>>());
            let den = norm64(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        },
    )
}

fn locality<T: Real>(sol: &Solution<T>, k: &[Vec<T>], k_group: &[usize], at: impl Fn(&[T]) -> Vec<T> + Sync) -> Check {
    if k.len() != k_group.len() {
        return Check::at_most("locality", f64::INFINITY, 0.0, None).with_note("atom and group lists differ in length");
    }
    let idx: Vec<usize> = (0..k.len()).collect();
    let w = worst_over(
        &idx,
        |&i| to64(&k[i]),
        |&i| {
            let y = at(&k[i]);
            sol.groups
                .iter()
                .enumerate()
                .filter(|(j, g)| {
                    *j != k_group[i] && {
                        let (v, gr) = g.u.value_grad(&y);
                        v != T::zero() || gr.iter().any(|c| *c != T::zero())
                    }
                })
                .count() as f64
        },
    );
    check_max("locality", w, 0.0)
}

/// Recomputes every ledger entry from the logged atom ids and checks the three-part budget.
pub fn mass_ledger_audit<T: Real>(sol: &Solution<T>) -> Report {
    let weights: HashMap<usize, f64> = sol
        .atoms
        .id
        .iter()
        .zip(&sol.atoms.weights)
        .map(|(&i, w)| (i, w.to_f64_lossy()))
        .collect();
    let mass = |ids: &[usize]| ids.iter().map(|i| weights.get(i).copied().unwrap_or(f64::NAN)).sum::<f64>();
    let led = &sol.ledger;
    let mut parts = vec![("partition", &led.partition), ("separation", &led.separation)];
    for g in &led.groups {
        parts.push(("group", g));
    }
    let mut recompute = Worst::new();
    let mut over_budget = Worst::new();
    for (i, (_, p)) in parts.iter().enumerate() {
        recompute.see((mass(&p.dropped_ids) - p.dropped_mass).abs(), &[i as f64]);
        over_budget.see(p.dropped_mass - p.budget, &[i as f64]);
    }
    let sum_parts: f64 = parts.iter().map(|(_, p)| p.dropped_mass).sum();
    let all_mass: f64 = sol.atoms.weights.iter().map(|w| w.to_f64_lossy()).sum();
    let k_mass: f64 = sol.k.weights.iter().map(|w| w.to_f64_lossy()).sum();
    let share = led.partition.budget;
    let up = 1.0 + LEDGER_TOLERANCE;
    let thirds_ok = (led.separation.budget - share).abs() <= LEDGER_TOLERANCE * share
        && led.groups.iter().map(|g| g.budget).sum::<f64>() <= share * up
        && 3.0 * share <= led.eps * up;
    Report::new(vec![
        check_max("ledger_recomputed", recompute, LEDGER_TOLERANCE),
        Check::at_most("ledger_sum", (sum_parts - led.total_dropped).abs(), LEDGER_TOLERANCE, None),
        Check::at_most(
            "ledger_mass_balance",
            (all_mass - k_mass - led.total_dropped).abs(),
            LEDGER_TOLERANCE * all_mass.max(1.0),
            None,
        ),
        Check::below(
            "ledger_parts_within_budget",
            over_budget.value_or_zero().max(f64::MIN),
            0.0,
            over_budget.at,
        ),
        Check::at_most("ledger_thirds", if thirds_ok { 0.0 } else { 1.0 }, 0.0, None),
        Check::below("ledger_total_below_eps", led.total_dropped, led.eps, None),
    ])
}

fn boxes_inside(boxes: &[&Aabb<f64>], omega: &Aabb<f64>) -> Check {
    let mut w = Worst::new();
    for b in boxes {
        let c = omega.clearance(b).into_iter().fold(f64::INFINITY, f64::min);
        w.see(-c, &b.center());
    }
    Check::below("support_boxes_inside_omega", w.value_or_zero().max(-1e300), 0.0, w.at)
}

/// Checks of a divergence solution: identity on `K` by exact gradients and by
/// per-stage central differences, grid sup, Lipschitz bounds, mass ledger, support and locality.
pub fn verify_divergence<T: Real>(sol: &Solution<T>, p: &DivergenceProblem<T>, grid_resolution: usize, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = sol.total();
    let f = &p.datum;
    let eps = p.eps.to_f64_lossy();
    let delta = p.delta.to_f64_lossy();
    let m = sol.m.to_f64_lossy();
    let tol = sol.residual_tol.to_f64_lossy();
    let omega: Aabb<f64> = p.measure.omega.cast();
    let staged = staged_fields(sol);

    let fmax = sol.k.points.iter().fold(0.0f64, |a, x| a.max(f.value(x).abs().to_f64_lossy()));
    let exact = worst_over(&sol.k.points, |x| to64(x), |x| (v.divergence(x) - f.value(x)).abs().to_f64_lossy());
    let fd = worst_over(
        &sol.k.points,
        |x| to64(x),
        |x| (fd_divergence(sol, &staged, x) - f.value(x)).abs().to_f64_lossy(),
    );

    let anchors: Vec<Vec<f64>> = sol.k.points.iter().map(|x| to64(x)).collect();
    let grid = dense_points(&mut rng, &omega, &anchors, grid_resolution);
    let z_at = |x: &[f64]| to64(&sol.field.eval(&from64::<T>(x)));
    let sup = worst_over(&grid, Clone::clone, |x| norm64(&z_at(x)));
    let grad = worst_over(&grid, Clone::clone, |x| jacobian_norm(sol, &from64::<T>(x)));
    let region = sol.working_box.as_ref().map_or(omega.clone(), |b| b.cast());
    let pairs = sampling::pairs(&mut rng, &region, &anchors, LIP_PAIRS, MIN_PAIR_SCALE);
    let lip = empirical_lipschitz(&pairs, z_at);
    let cert_lip = sol.certified_lip.to_f64_lossy();
    let cert_sup = sol.certified_sup.to_f64_lossy();

    let boxes: Vec<Aabb<f64>> = sol.groups.iter().flat_map(|g| g.boxes.iter().map(|b| b.cast())).collect();
    let outside = worst_over(&grid, Clone::clone, |x| {
        if boxes.iter().any(|b| b.contains(x)) {
            0.0
        } else {
            let (a, b): (Vec<f64>, f64) = (z_at(x), jacobian_norm(sol, &from64::<T>(x)));
            norm64(&a) + b
        }
    });

    let mut r = Report::new(vec![
        check_max("divergence_exact", exact, tol * (1.0 + 1e-9) + 64.0 * f64::EPSILON * (1.0 + fmax)),
        check_max("divergence_fd", fd, FD_TOLERANCE),
        check_max("sup_grid", sup.clone(), eps),
        check_max("sup_certificate_dominates_grid", sup, cert_sup),
        Check::at_most("sup_certificate", cert_sup, eps, None),
        check_max("lipschitz_pairs", lip, cert_lip),
        check_max("lipschitz_grid_gradient", grad, cert_lip),
        Check::below("lipschitz_certificate", cert_lip, (1.0 + delta) * m, None).with_note("strict unless M = 0"),
        boxes_inside(&boxes.iter().collect::<Vec<_>>(), &omega),
        check_max("support_outside_boxes", outside, 0.0),
        locality(sol, &sol.k.points, &sol.k_group, |x| x.to_vec()),
    ]);
    if m == 0.0 {
        // the strict inequality degenerates to 0 < 0
        let c = Check::at_most("lipschitz_certificate", cert_lip, 0.0, None);
        let i = r.checks.iter().position(|c| c.name == "lipschitz_certificate").expect("present");
        r.checks[i] = c;
        r = Report::new(r.checks);
    }
    r.extend(mass_ledger_audit(sol));
    r
}

/// Checks of a Jacobian solution or a perturbed diffeomorphism.
pub fn verify_jacobian<T: Real>(sol: &MapSolution<T>, p: &JacobianProblem<T>, grid_resolution: usize, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &p.datum;
    let eps = p.eps.to_f64_lossy();
    let delta = p.delta.to_f64_lossy();
    let omega: Aabb<f64> = p.measure.omega.cast();
    let inner = &sol.inner;
    let push = sol.push.as_ref();
    let base = |x: &[T]| -> Vec<T> { push.map_or_else(|| x.to_vec(), |q| q.map.apply(x)) };
    let base_det = |x: &[T]| -> T { push.map_or(T::one(), |q| det(q.map.jacobian(x))) };

    let gmax = sol.k.points.iter().fold(0.0f64, |a, x| a.max(g.value(x).abs().to_f64_lossy()));
    let dmax = sol.k.points.iter().fold(1.0f64, |a, x| a.max(base_det(x).abs().to_f64_lossy()));
    let tol = inner.residual_tol.to_f64_lossy() * dmax * (1.0 + 1e-9) + 64.0 * f64::EPSILON * (1.0 + gmax);

    let dets: Vec<(T, T)> = sol
        .k
        .points
        .par_iter()
        .map(|x| {
            let direct = det(sol.map.jacobian(x));
            let y = base(x);
            let s = inner.groups.iter().fold(T::zero(), |acc, gr| {
                acc + gr.u.grad(&y).iter().zip(&gr.direction).fold(T::zero(), |a, (u, v)| a + *u * *v)
            });
            (direct, (T::one() + s) * base_det(x))
        })
        .collect();
    let idx: Vec<usize> = (0..sol.k.len()).collect();
    let wit = |&i: &usize| to64(&sol.k.points[i]);
    let direct = worst_over(&idx, wit, |&i| (dets[i].0 - g.value(&sol.k.points[i])).abs().to_f64_lossy());
    let rank_one = worst_over(&idx, wit, |&i| (dets[i].1 - g.value(&sol.k.points[i])).abs().to_f64_lossy());
    let agree = worst_over(&idx, wit, |&i| {
        ((dets[i].0 - dets[i].1).abs() / (T::one() + dets[i].0.abs())).to_f64_lossy()
    });

    let disp = |x: &[f64]| -> Vec<f64> {
        let xt = from64::<T>(x);
        let phi = sol.map.eval(&xt);
        let b = base(&xt);
        phi.iter().zip(&b).map(|(a, c)| (*a - *c).to_f64_lossy()).collect()
    };
    let anchors: Vec<Vec<f64>> = sol.k.points.iter().map(|x| to64(x)).collect();
    let grid = dense_points(&mut rng, &omega, &anchors, grid_resolution);
    let sup = worst_over(&grid, Clone::clone, |x| norm64(&disp(x)));
    let lip_f = push.map_or(1.0, |q| q.lip_forward.to_f64_lossy());
    let lip_inv = push.map_or(1.0, |q| q.lip_inverse.to_f64_lossy());
    let pairs = sampling::pairs(&mut rng, &omega, &anchors, LIP_PAIRS, MIN_PAIR_SCALE);
    let pairs: Vec<_> = pairs.into_iter().filter(|(_, y)| omega.contains(y)).collect();
    let lip = empirical_lipschitz(&pairs, disp);
    let l = sol.l.to_f64_lossy();
    let cert_lip = sol.certified_lip.to_f64_lossy();
    let cert_sup = sol.certified_sup.to_f64_lossy();

    let injectivity = if sol.diffeo {
        let c = (1.0 - (1.0 + delta) * l - 1e-9) / lip_inv;
        let pr = sampling::pairs(&mut rng, &omega, &anchors, INJECTIVITY_PAIRS, MIN_PAIR_SCALE);
        let pr: Vec<_> = pr.into_iter().filter(|(_, y)| omega.contains(y)).collect();
        let phi = |x: &[f64]| to64(&sol.map.eval(&from64::<T>(x)));
        let w = worst_over(
            &pr,
            |p| p.0.clone(),
            |(x, y)| {
                let a = phi(x);
                let b = phi(y);
                let num = norm64(&a.iter().zip(&b).map(|(s, t)| s - t).collect::<Vec<_>>());
                let den = norm64(&x.iter().zip(y).map(|(s, t)| s - t).collect::<Vec<_>>());
                if den > 0.0 {
                    c - num / den
                } else {
                    f64::NEG_INFINITY
                }
            },
        );
        check_max("injectivity", w, 0.0)
    } else {
        Check::skipped("injectivity", "not applicable: (1 + delta) L >= 1")
    };

    let boxes: Vec<Aabb<f64>> = inner.groups.iter().flat_map(|g| g.boxes.iter().map(|b| b.cast())).collect();
    let outside = worst_over(&grid, Clone::clone, |x| {
        let y = to64(&base(&from64::<T>(x)));
        if boxes.iter().any(|b| b.contains(&y)) {
            0.0
        } else {
            norm64(&disp(x))
        }
    });
    let support_region = push.map_or(omega.clone(), |q| q.image_box.cast());

    let mut r = Report::new(vec![
        check_max("det_direct", direct, tol),
        check_max("det_rank_one", rank_one, tol),
        check_max("det_routes_agree", agree, 1e-12),
        check_max("sup_grid", sup.clone(), eps),
        check_max("sup_certificate_dominates_grid", sup, cert_sup),
        Check::at_most("sup_certificate", cert_sup, eps, None),
        check_max("lipschitz_pairs", lip, cert_lip),
        Check::at_most("lipschitz_certificate", cert_lip, (1.0 + delta) * l * lip_f, None),
        injectivity,
        boxes_inside(&boxes.iter().collect::<Vec<_>>(), &support_region),
        check_max("identity_outside_support", outside, 0.0),
        locality(inner, &sol.k.points, &inner.k_group, base),
    ]);
    r.extend(mass_ledger_audit(inner));
    r
}

/// `|det(I + v w^T) - (1 + v.w)|` over random `v, w` with entries in `[-1, 1]`.
pub fn brute_force_det_lemma(d: usize, trials: usize, seed: u64) -> Report {
    rank_one_det_agreement(d, trials, seed, |v, w| 1.0 + v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
}

/// Elimination determinant of `I + v w^T` against `claimed(v, w)`.
pub fn rank_one_det_agreement(d: usize, trials: usize, seed: u64, claimed: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
        .map(|_| {
            let v = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (v, w)
        })
        .collect();
    let w = worst_over(
        &samples,
        |s| s.0.iter().chain(&s.1).copied().collect(),
        |(v, w)| (det(rank_one_update(v, w)) - claimed(v, w)).abs(),
    );
    Report::new(vec![check_max(&format!("rank_one_det_d{d}"), w, 1e-12)])
}

/// Exact gradients of `f` against central differences at `count` points of `region`,
/// relative to `max(|grad f|, scale)`. The differences are taken in double-double
/// with a step well below the smallest feature of `f`.
pub fn gradient_oracle<T: Real>(
    name: &str,
    f: &ExprRef<T>,
    region: &Aabb<T>,
    anchors: &[Vec<T>],
    count: usize,
    scale: f64,
    seed: u64,
) -> Check {
    gradient_agreement(name, f, |x| f.grad(x), region, anchors, count, scale, seed)
}

/// [`gradient_oracle`] with the claimed gradient supplied separately.
#[allow(clippy::too_many_arguments)]
pub fn gradient_agreement<T: Real>(
    name: &str,
    f: &ExprRef<T>,
    claimed: impl Fn(&[T]) -> Vec<T> + Sync,
    region: &Aabb<T>,
    anchors: &[Vec<T>],
    count: usize,
    scale: f64,
    seed: u64,
) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature = f.feature_scale().to_f64_lossy();
    let wide: ExprRef<TwoFloat> = Expr::cast(f);
    let h = TwoFloat::from((feature * ORACLE_STEP).min(FD_MAX_STEP));
    let a64: Vec<Vec<f64>> = anchors.iter().map(|x| to64(x)).collect();
    let pts = sampling::points(&mut rng, &region.cast(), &a64, count, (feature / 4.0).clamp(1e-15, 1e-4));
    let w = worst_over(&pts, Clone::clone, |x| {
        let exact = to64(&claimed(&from64::<T>(x)));
        let xw: Vec<TwoFloat> = x.iter().map(|&v| TwoFloat::from(v)).collect();
        let approx = to64(&central_gradient(|p| wide.value(p), &xw, h));
        let err = norm64(&exact.iter().zip(&approx).map(|(a, b)| a - b).collect::<Vec<_>>());
        err / norm64(&exact).max(scale)
    });
    check_max(name, w, 1e-6)
}

/// Gradient oracle for `V` itself: every group's field and every stage.
pub fn field_gradient_oracle<T: Real>(sol: &Solution<T>, count: usize, seed: u64) -> Report {
    let region = sol.working_box.clone().unwrap_or_else(|| sol.omega.clone());
    let mut checks = Vec::new();
    for (j, g) in sol.groups.iter().enumerate() {
        let anchors: Vec<Vec<T>> = g.atoms.iter().map(|&i| sol.k.points[i].clone()).collect();
        for (n, f) in g.stage_fields.iter().enumerate() {
            let scale = f.grad_bound(&region).to_f64_lossy();
            checks.push(gradient_oracle(
                &format!("gradient_group{j}_stage{n}"),
                f,
                &region,
                &anchors,
                count,
                scale,
                seed ^ (n as u64),
            ));
        }
        let cut_scale = g.cutoff.grad_bound(&region).to_f64_lossy();
        checks.push(gradient_oracle(
            &format!("gradient_group{j}_cutoff"),
            &g.cutoff,
            &region,
            &anchors,
            count,
            cut_scale,
            seed,
        ));
    }
    Report::new(checks)
}

/// `V` as plain components, for dumps.
pub fn components<T: Real>(v: &VectorField<T>, x: &[T]) -> Vec<T> {
    v.eval(x)
}
