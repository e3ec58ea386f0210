//! One line per acceptance criterion, then a single assertion over all of them.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use lusin::assembly::{
    perturb_background, perturb_diffeomorphism, solve_divergence, solve_jacobian, Diffeomorphism, DivergenceProblem, JacobianProblem,
    MapSolution, Solution,
};
use lusin::catalog;
use lusin::fields::{parse_expr, Expr, ExprRef, VectorField};
use lusin::geometry::{build_direction_net, subspace_transverse, Aabb, Cone, Direction, Subspace};
use lusin::measures::{cone_null_certificate, sample_atoms, Carrier, GraphCarrier, IfsCarrier, ModelMeasure, Piece, Similarity};
use lusin::verify::{
    brute_force_det_lemma, corrupt_map, corrupt_solution, field_gradient_oracle, gradient_agreement, rank_one_det_agreement,
    verify_divergence, verify_jacobian, Corruption, MapCorruption,
};
use lusin::width::{verify_width, width_function, WidthFunction};
use lusin::Report;

const GRID: usize = 400;
const TIME_LIMIT: Duration = Duration::from_secs(60);

fn expr(s: &str) -> ExprRef<f64> {
    parse_expr(s, 2).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn failures(r: &Report) -> String {
    r.failures()
        .map(|c| format!("{} ({:.3e} > {:.3e})", c.name, c.worst, c.limit))
        .collect::<Vec<_>>()
        .join(", ")
}

struct DivFixture {
    name: &'static str,
    problem: DivergenceProblem<f64>,
    solution: Solution<f64>,
    solve_time: Duration,
}

fn div_fixtures() -> Vec<DivFixture> {
    let specs: Vec<(&str, ModelMeasure<f64>, &str, f64)> = vec![
        ("segment", catalog::segment_measure(), "1", 0.5),
        ("sine_graph", catalog::sine_measure(), "x1", 0.5),
        ("cantor", catalog::cantor_measure(8), "sin(3*x1) + 0.5", 0.5),
        ("segment_and_cantor", catalog::union_measure(7), "x1", 0.5),
        ("segment_small_eps", catalog::segment_measure(), "sin(3*x1) + 0.5", 0.1),
        ("cantor_small_eps", catalog::cantor_measure(8), "x1", 0.1),
    ];
    specs
        .into_iter()
        .map(|(name, m, f, eps)| {
            let problem = DivergenceProblem::new(m, expr(f), eps, eps);
            let t0 = Instant::now();
            let solution = solve_divergence(&problem).unwrap();
            DivFixture {
                name,
                problem,
                solution,
                solve_time: t0.elapsed(),
            }
        })
        .collect()
}

fn divergence_contract(fx: &[DivFixture]) -> Outcome {
    let mut bad = Vec::new();
    for f in fx {
        let t0 = Instant::now();
        let r = verify_divergence(&f.solution, &f.problem, GRID, 11);
        let elapsed = f.solve_time + t0.elapsed();
        let s = &f.solution;
        let m = s.m;
        let exact = r.get("divergence_exact").unwrap();
        let mut problems = Vec::new();
        if !r.pass {
            problems.push(failures(&r));
        }
        if exact.worst > 1e-9 * m || exact.limit > 1e-9 * m {
            problems.push(format!(
                "exact error {:.3e}, tolerance {:.3e}, 1e-9 M = {:.3e}",
                exact.worst,
                exact.limit,
                1e-9 * m
            ));
        }
        if r.get("divergence_fd").unwrap().limit > 1e-4 {
            problems.push("fd tolerance above 1e-4".into());
        }
        if s.ledger.total_dropped >= s.eps || s.ledger.total_dropped.is_nan() {
            problems.push("dropped mass not below eps".into());
        }
        if s.certified_lip > (1.0 + s.delta) * m {
            problems.push("Lipschitz certificate above (1+delta) M".into());
        }
        if s.atoms.len() > 10_000 {
            problems.push(format!("{} atoms", s.atoms.len()));
        }
        if elapsed > TIME_LIMIT {
            problems.push(format!("took {elapsed:?}"));
        }
        if !problems.is_empty() {
            bad.push(format!("{}: {}", f.name, problems.join("; ")));
        }
    }
    let worst = fx.iter().map(|f| f.solve_time).max().unwrap();
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} fixtures, slowest solve {worst:.2?}", fx.len())
        } else {
            bad.join(" | ")
        },
    )
}

struct JacFixture {
    name: String,
    problem: JacobianProblem<f64>,
    solution: MapSolution<f64>,
    solve_time: Duration,
}

fn jac_fixtures() -> Vec<JacFixture> {
    type Fixture = (&'static str, fn() -> ModelMeasure<f64>);
    let measures: Vec<Fixture> = vec![
        ("segment", catalog::segment_measure),
        ("sine_graph", catalog::sine_measure),
        ("cantor", || catalog::cantor_measure(8)),
        ("segment_and_cantor", || catalog::union_measure(7)),
    ];
    let mut specs = Vec::new();
    for g in ["1", "1.2", "1 + 0.3*sin(2*x1)"] {
        for (mname, m) in &measures {
            specs.push((format!("g={g} on {mname}"), m(), g, 0.5));
        }
    }
    specs.push((
        "g=1 + 0.3*sin(2*x1) on segment, eps 0.1".into(),
        catalog::segment_measure(),
        "1 + 0.3*sin(2*x1)",
        0.1,
    ));
    specs.push(("g=1.2 on cantor, eps 0.1".into(), catalog::cantor_measure(8), "1.2", 0.1));
    specs
        .into_iter()
        .map(|(name, m, g, eps)| {
            let problem = JacobianProblem::new(m, expr(g), eps, eps);
            let t0 = Instant::now();
            let solution = solve_jacobian(&problem).unwrap();
            JacFixture {
                name,
                problem,
                solution,
                solve_time: t0.elapsed(),
            }
        })
        .collect()
}

fn jacobian_contract(fx: &[JacFixture]) -> Outcome {
    let mut bad = Vec::new();
    for f in fx {
        let (p, s) = (&f.problem, &f.solution);
        let t0 = Instant::now();
        let r = verify_jacobian(s, p, GRID, 5);
        let elapsed = f.solve_time + t0.elapsed();
        let gmax = s.k.points.iter().map(|x| p.datum.value(x).abs()).fold(0.0, f64::max);
        let det_err = (0..s.k.len())
            .map(|i| (s.det_direct[i] - p.datum.value(&s.k.points[i])).abs())
            .fold(0.0, f64::max);
        let mut problems = Vec::new();
        if !r.pass {
            problems.push(failures(&r));
        }
        if det_err > 1e-9 * s.l * (1.0 + gmax) {
            problems.push(format!("det error {det_err:.3e}"));
        }
        if s.certified_lip > (1.0 + s.delta) * s.l {
            problems.push("Lipschitz certificate above (1+delta) L".into());
        }
        let injective_expected = (1.0 + s.delta) * s.l < 1.0;
        let inj = r.get("injectivity").unwrap();
        if injective_expected && (inj.note.is_some() || !inj.pass) {
            problems.push("injectivity not established".into());
        }
        if elapsed > TIME_LIMIT {
            problems.push(format!("took {elapsed:?}"));
        }
        if !problems.is_empty() {
            bad.push(format!("{}: {}", f.name, problems.join("; ")));
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} fixtures", fx.len())
        } else {
            bad.join(" | ")
        },
    )
}

fn residual_decay(fx: &[DivFixture], jac: &[JacFixture]) -> Outcome {
    let mut bad = Vec::new();
    let mut longest = 0;
    let mut check = |name: &str, s: &Solution<f64>| {
        for (j, g) in s.groups.iter().enumerate() {
            longest = longest.max(g.stages_run);
            for st in &g.stages {
                if st.residual_max > st.residual_law {
                    bad.push(format!(
                        "{name} group {j} stage {}: {:.3e} > {:.3e}",
                        st.index, st.residual_max, st.residual_law
                    ));
                }
            }
        }
    };
    for f in fx {
        check(f.name, &f.solution);
    }
    for f in jac {
        check(&f.name, &f.solution.inner);
    }
    let mut deep = DivergenceProblem::new(catalog::cantor_measure(8), expr("sin(3*x1) + 0.5"), 0.5, 0.5);
    deep.options.residual_tol = 1e-14;
    let s = solve_divergence(&deep).unwrap();
    check("cantor_deep", &s);
    if longest < 10 {
        bad.push(format!("longest run has {longest} stages"));
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("longest run {longest} stages")
        } else {
            bad.join(" | ")
        },
    )
}

fn planar_omega() -> Aabb<f64> {
    Aabb::cube(2, -2.0, 2.0)
}

fn graph_measure(profile: &str, lo: f64, hi: f64) -> (ModelMeasure<f64>, Carrier<f64>) {
    let g = GraphCarrier::new(1, expr(profile), Aabb::new(vec![lo, 0.0], vec![hi, 0.0]), &planar_omega()).unwrap();
    let c = Carrier::Graph(g);
    (
        ModelMeasure::new(
            planar_omega(),
            vec![Piece {
                carrier: c.clone(),
                weight: 1.0,
            }],
        )
        .unwrap(),
        c,
    )
}

fn ifs_measure(maps: &[(f64, f64)], len: f64, generation: usize) -> (ModelMeasure<f64>, Carrier<f64>) {
    let maps = maps
        .iter()
        .map(|&(r, t)| Similarity {
            ratio: r,
            translation: vec![t, 0.0],
        })
        .collect();
    let f = IfsCarrier::new(maps, Aabb::new(vec![0.0, 0.0], vec![len, 0.0]), generation, 200, &planar_omega()).unwrap();
    let c = Carrier::Ifs(f);
    (
        ModelMeasure::new(
            planar_omega(),
            vec![Piece {
                carrier: c.clone(),
                weight: 1.0,
            }],
        )
        .unwrap(),
        c,
    )
}

/// Similarities `(ratio, shift)`, base length and cone axis.
type IfsSpec = (&'static [(f64, f64)], f64, [f64; 2]);

struct WidthCase {
    label: String,
    width: WidthFunction<f64>,
    region: Aabb<f64>,
}

fn width_cases() -> Vec<WidthCase> {
    let zetas = [1e-1, 1e-2, 1e-3, 1e-4];
    let graphs: [(&str, f64, f64, f64, f64); 10] = [
        ("0", -0.5, 0.5, 1.0, FRAC_PI_4),
        ("0.04*sin(x1)", -0.5, 0.5, 1.0, FRAC_PI_4),
        ("0.3*x1", -0.8, 0.8, 1.0, FRAC_PI_4),
        ("0.2*cos(3*x1)", -0.5, 0.5, -1.0, FRAC_PI_4),
        ("0.15*x1*x1", -1.0, 1.0, 1.0, FRAC_PI_4),
        ("0.1*sin(5*x1) + 0.1", 0.0, 1.0, 1.0, FRAC_PI_6),
        ("0.5*x1 - 0.2", -0.5, 0.5, -1.0, FRAC_PI_4),
        ("0.05*exp(x1)", -1.0, 1.0, 1.0, FRAC_PI_3),
        ("0.05*x1*x1*x1", -1.0, 1.0, -1.0, FRAC_PI_4),
        ("0.01*sin(20*x1)", -0.5, 0.5, 1.0, FRAC_PI_6),
    ];
    let ifs: [IfsSpec; 10] = [
        (&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], 1.0, [1.0, 0.0]),
        (&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], 1.0, [1.0, 0.2]),
        (&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], 1.0, [-1.0, 0.3]),
        (&[(0.25, 0.0), (0.25, 0.75)], 1.0, [1.0, 0.0]),
        (&[(0.25, 0.0), (0.25, 0.75)], 1.0, [1.0, -0.4]),
        (&[(0.2, 0.0), (0.2, 0.4), (0.2, 0.8)], 1.0, [1.0, 0.0]),
        (&[(0.2, 0.0), (0.2, 0.4), (0.2, 0.8)], 1.0, [-1.0, -0.1]),
        (&[(0.3, 0.0), (0.4, 0.6)], 1.0, [1.0, 0.1]),
        (&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 0.8)], 1.2, [1.0, 0.0]),
        (&[(0.1, 0.0), (0.1, 0.45), (0.1, 0.9)], 1.0, [1.0, 0.25]),
    ];
    let mut out = Vec::new();
    for (i, &(profile, lo, hi, sign, alpha)) in graphs.iter().enumerate() {
        let zeta = zetas[i % zetas.len()];
        let (m, c) = graph_measure(profile, lo, hi);
        let e = sample_atoms(&m, 400).unwrap();
        let cone = Cone::new(Direction::axis(2, 1, sign), alpha).unwrap();
        let cert = cone_null_certificate(&c, &cone).unwrap();
        let width = width_function(&cert, &e, &cone, zeta).unwrap();
        let region = Aabb::new(vec![lo - 0.2, -1.5], vec![hi + 0.2, 1.5]);
        out.push(WidthCase {
            label: format!("graph {profile} zeta {zeta:e}"),
            width,
            region,
        });
    }
    for (i, &(maps, len, axis)) in ifs.iter().enumerate() {
        let zeta = zetas[i % zetas.len()];
        let (m, c) = ifs_measure(maps, len, 6);
        let e = sample_atoms(&m, 6).unwrap();
        let cone = Cone::new(Direction::normalize(&axis).unwrap(), FRAC_PI_4).unwrap();
        let cert = cone_null_certificate(&c, &cone).unwrap();
        let width = width_function(&cert, &e, &cone, zeta).unwrap();
        let region = Aabb::new(vec![-0.3, -0.5], vec![len + 0.3, 0.5]);
        out.push(WidthCase {
            label: format!("ifs {i} zeta {zeta:e}"),
            width,
            region,
        });
    }
    out
}

fn width_lemma(cases: &[WidthCase]) -> Outcome {
    let mut bad = Vec::new();
    let mut kinds = BTreeSet::new();
    let mut zetas = BTreeSet::new();
    for c in cases {
        kinds.insert(c.label.split(' ').next().unwrap().to_string());
        zetas.insert(format!("{:e}", c.width.zeta));
        let r = verify_width(&c.width, &c.region, GRID);
        if !r.pass {
            bad.push(format!("{}: {}", c.label, failures(&r)));
        }
        if r.checks
            .iter()
            .any(|k| k.limit - c.width.zeta.max(c.width.cone.c_alpha()).max(c.width.cone.cot()) > 1e-9 + 1e-15)
        {
            bad.push(format!("{}: tolerance above 1e-9", c.label));
        }
    }
    if cases.len() < 20 || kinds.len() < 2 || zetas.len() < 4 {
        bad.push(format!("{} cases, classes {kinds:?}, zetas {zetas:?}", cases.len()));
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} width functions, zeta {zetas:?}", cases.len())
        } else {
            bad.join(" | ")
        },
    )
}

fn random_subspace(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Subspace<f64> {
    let vs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect();
    Subspace::span(d, &vs)
}

fn nets() -> Outcome {
    let mut bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for d in 2..=4 {
        for alpha in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3] {
            let net = build_direction_net(d, alpha).unwrap();
            let r = lusin::geometry::verify_net(&net, d, 10_000, 17);
            if !r.pass {
                bad.push(format!(
                    "d={d} alpha={alpha:.4}: {} subspace, {} covering failures",
                    r.subspace_failures, r.covering_failures
                ));
            }
            let mut mismatches = 0;
            for t in 0..2000 {
                let l = random_subspace(&mut rng, d, 1 + t % (d - 1));
                for j in 0..net.len() {
                    let c: Cone<f64> = net.cone(j);
                    if subspace_transverse(&l, &c) != subspace_transverse(&l, &c.reflected()) {
                        mismatches += 1;
                    }
                }
            }
            if mismatches > 0 {
                bad.push(format!("d={d} alpha={alpha:.4}: {mismatches} reflection mismatches"));
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            "9 nets, 10^4 subspaces per dimension".to_string()
        } else {
            bad.join(" | ")
        },
    )
}

fn rank_one() -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for d in 2..=5 {
        let r = brute_force_det_lemma(d, 10_000, 23 + d as u64);
        worst = worst.max(r.checks[0].worst);
        if !r.pass || r.checks[0].limit > 1e-12 {
            bad.push(format!("d={d}: {}", failures(&r)));
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("worst {worst:.2e}")
        } else {
            bad.join(" | ")
        },
    )
}

fn corollary() -> Outcome {
    let mut bad = Vec::new();
    let maps = [
        ("shear", ["x1 + 0.3*x2", "x2"], ["x1 - 0.3*x2", "x2"], "1.1"),
        ("scaling", ["2*x1", "2*x2"], ["0.5*x1", "0.5*x2"], "4 + 0.4*sin(2*x1)"),
    ];
    for (name, fwd, inv, g) in maps {
        let f = Diffeomorphism {
            forward: fwd.iter().map(|s| expr(s)).collect(),
            inverse: inv.iter().map(|s| expr(s)).collect(),
        };
        let p = JacobianProblem::new(catalog::segment_measure(), expr(g), 0.5, 0.5);
        let s = perturb_diffeomorphism(&f, &p).unwrap();
        let r = verify_jacobian(&s, &p, GRID, 3);
        let push = s.push.as_ref().unwrap();
        let h_dev =
            s.k.points
                .iter()
                .map(|x| {
                    let det = lusin::linalg::det(f.jacobian(x));
                    (p.datum.value(x) / det - 1.0).abs()
                })
                .fold(0.0, f64::max);
        let err = (0..s.k.len())
            .map(|i| (s.det_direct[i] - p.datum.value(&s.k.points[i])).abs())
            .fold(0.0, f64::max);
        let mut problems = Vec::new();
        if !r.pass {
            problems.push(failures(&r));
        }
        if h_dev == 0.0 {
            problems.push("h is identically one".into());
        }
        if err > 1e-8 {
            problems.push(format!("det error {err:.3e}"));
        }
        if s.certified_lip > (1.0 + s.delta) * push.lip_forward * h_dev * (1.0 + 1e-12) {
            problems.push(format!("certificate {:.3e} above (1+delta) Lip(F) max|h-1|", s.certified_lip));
        }
        if !problems.is_empty() {
            bad.push(format!("{name}: {}", problems.join("; ")));
        }
    }
    let dbl = Diffeomorphism {
        forward: vec![expr("2*x1"), expr("2*x2")],
        inverse: vec![expr("0.5*x1"), expr("0.5*x2")],
    };
    let s = perturb_diffeomorphism(&dbl, &JacobianProblem::new(catalog::segment_measure(), expr("4"), 0.5, 0.5)).unwrap();
    let exact = catalog::square::<f64>()
        .grid(50, false)
        .iter()
        .all(|x| s.map.eval(x) == dbl.apply(x));
    if !exact {
        bad.push("F = 2 Id with g = 4 does not reproduce F".into());
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            "shear, scaling, exact doubling".to_string()
        } else {
            bad.join(" | ")
        },
    )
}

fn background() -> Outcome {
    let w = VectorField::from_components(vec![expr("x1*x2"), expr("x2")]);
    let p = DivergenceProblem::new(catalog::segment_measure(), expr("x1"), 0.5, 0.5);
    let s = perturb_background(&w, &p).unwrap();
    let total = s.total();
    let err =
        s.k.points
            .iter()
            .map(|x| (total.divergence(x) - p.datum.value(x)).abs())
            .fold(0.0, f64::max);
    let grid = s.omega.grid(GRID, false);
    let sup = grid
        .iter()
        .chain(s.k.points.iter())
        .map(|x| s.field.eval(x).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let pass = err <= 1e-9 * s.m && sup <= s.eps && s.certified_sup <= s.eps;
    Outcome::new(pass, format!("div error {err:.2e} (M = {:.3}), sup |Z| {sup:.3e}", s.m))
}

fn gradient_oracle(div: &[DivFixture], jac: &[JacFixture], widths: &[WidthCase]) -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut see = |name: &str, r: Report| {
        n += r.checks.len();
        worst = r.checks.iter().map(|c| c.worst).fold(worst, f64::max);
        if !r.pass {
            bad.push(format!("{name}: {}", failures(&r)));
        }
    };
    for f in div {
        see(f.name, field_gradient_oracle(&f.solution, 1000, 31));
    }
    for f in jac {
        see(&f.name, field_gradient_oracle(&f.solution.inner, 1000, 37));
    }
    for w in widths {
        let scale = w.width.grad_bound;
        let c = lusin::verify::gradient_oracle("phi", &w.width.phi, &w.region, &w.width.target, 1000, scale, 41);
        see(&w.label, Report::new(vec![c]));
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{n} fields, worst relative {worst:.2e}")
        } else {
            bad.join(" | ")
        },
    )
}

fn mutation_div(s: &Solution<f64>, p: &DivergenceProblem<f64>, bad: &mut Vec<String>) -> BTreeSet<String> {
    let base = verify_divergence(s, p, 200, 1);
    if !base.pass {
        bad.push(format!("uncorrupted divergence fixture fails: {}", failures(&base)));
    }
    let mut covered = BTreeSet::new();
    for c in Corruption::ALL {
        let r = verify_divergence(&corrupt_solution(s, c), p, 200, 1);
        for t in c.targets() {
            match r.get(t) {
                Some(k) if !k.pass => {
                    covered.insert(t.to_string());
                }
                _ => bad.push(format!("{c:?} does not fail {t}")),
            }
        }
    }
    base.checks
        .iter()
        .map(|c| c.name.clone())
        .filter(|n| !covered.contains(n))
        .collect()
}

fn mutation_map(s: &MapSolution<f64>, p: &JacobianProblem<f64>, bad: &mut Vec<String>) -> BTreeSet<String> {
    let base = verify_jacobian(s, p, 200, 1);
    if !base.pass {
        bad.push(format!("uncorrupted map fixture fails: {}", failures(&base)));
    }
    let mut covered = BTreeSet::new();
    let mut record = |name: String, r: &Report, targets: &[&str]| {
        for t in targets {
            match r.get(t) {
                Some(k) if !k.pass => {
                    covered.insert(t.to_string());
                }
                _ => bad.push(format!("{name} does not fail {t}")),
            }
        }
    };
    for c in MapCorruption::ALL {
        let r = verify_jacobian(&corrupt_map(s, c), p, 200, 1);
        record(format!("{c:?}"), &r, c.targets());
    }
    for c in Corruption::ALL
        .into_iter()
        .filter(|c| c.targets().iter().all(|t| t.starts_with("ledger_")))
    {
        let mut m = s.clone();
        m.inner = corrupt_solution(&s.inner, c);
        let r = verify_jacobian(&m, p, 200, 1);
        record(format!("inner {c:?}"), &r, c.targets());
    }
    base.checks
        .iter()
        .map(|c| c.name.clone())
        .filter(|n| !covered.contains(n))
        .collect()
}

fn corrupt_width(w: &WidthFunction<f64>, f: impl Fn(ExprRef<f64>) -> ExprRef<f64>) -> WidthFunction<f64> {
    let mut out = w.clone();
    out.phi = f(w.phi.clone());
    out
}

fn mutation_width(bad: &mut Vec<String>) -> BTreeSet<String> {
    let (m, c) = graph_measure("0", 0.0, 1.0);
    let e = sample_atoms(&m, 40).unwrap();
    let cone = Cone::new(Direction::axis(2, 1, 1.0), FRAC_PI_4).unwrap();
    let w = width_function(&cone_null_certificate(&c, &cone).unwrap(), &e, &cone, 0.1).unwrap();
    let region = Aabb::new(vec![-0.5, -0.5], vec![1.5, 0.5]);
    let base = verify_width(&w, &region, 200);
    if !base.pass {
        bad.push(format!("uncorrupted width fixture fails: {}", failures(&base)));
    }
    let mut narrow = w.clone();
    narrow.zeta = 0.05;
    let cases: Vec<(&str, WidthFunction<f64>, &[&str])> = vec![
        (
            "shifted down",
            corrupt_width(&w, |p| Expr::sub(p, Expr::constant(0.01))),
            &["phi_lower"],
        ),
        ("narrowed zeta", narrow, &["phi_upper"]),
        ("negated", corrupt_width(&w, |p| Expr::scale(-1.0, p)), &["axial_slope_lower"]),
        ("steepened", corrupt_width(&w, |p| Expr::scale(1.5, p)), &["axial_slope_upper"]),
        ("halved", corrupt_width(&w, |p| Expr::scale(0.5, p)), &["axial_slope_on_target"]),
        (
            "tilted",
            corrupt_width(&w, |p| Expr::sum(vec![p, Expr::scale(2.0, Expr::coord(0))])),
            &["transverse_slope", "gradient_norm"],
        ),
    ];
    let mut covered = BTreeSet::new();
    for (label, cw, targets) in cases {
        let r = verify_width(&cw, &region, 200);
        for t in targets {
            match r.get(t) {
                Some(k) if !k.pass => {
                    covered.insert(t.to_string());
                }
                _ => bad.push(format!("width {label} does not fail {t}")),
            }
        }
    }
    base.checks
        .iter()
        .map(|c| c.name.clone())
        .filter(|n| !covered.contains(n))
        .collect()
}

fn mutation_misc(bad: &mut Vec<String>) {
    let mut net = build_direction_net(3, FRAC_PI_4).unwrap();
    net.directions.truncate(2);
    let r = lusin::geometry::verify_net(&net, 3, 2000, 3);
    if r.subspace_failures == 0 || r.covering_failures == 0 || r.pass {
        bad.push("truncated net passes".into());
    }
    let r = rank_one_det_agreement(3, 1000, 5, |v, w| 1.0 + v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + 1e-9);
    if r.pass {
        bad.push("perturbed rank-one formula passes".into());
    }
    let f = expr("sin(3*x1)*x2");
    let region = catalog::square::<f64>();
    let honest = gradient_agreement("g", &f, |x| f.grad(x), &region, &[], 1000, 1.0, 2);
    let skewed = gradient_agreement(
        "g",
        &f,
        |x| f.grad(x).iter().map(|g| g * (1.0 + 1e-5)).collect(),
        &region,
        &[],
        1000,
        1.0,
        2,
    );
    if !honest.pass || skewed.pass {
        bad.push(format!("gradient oracle: honest {:.2e}, skewed {:.2e}", honest.worst, skewed.worst));
    }
}

fn mutations() -> Outcome {
    let mut bad = Vec::new();
    let p = DivergenceProblem::new(catalog::partial_measure(), expr("x1"), 0.5, 0.5);
    let s = solve_divergence(&p).unwrap();
    let uncovered = mutation_div(&s, &p, &mut bad);
    if !uncovered.is_empty() {
        bad.push(format!("divergence checks without a corruption: {uncovered:?}"));
    }
    let p = JacobianProblem::new(catalog::partial_measure(), expr("1 + 0.3*sin(2*x1)"), 0.5, 0.5);
    let s = solve_jacobian(&p).unwrap();
    let uncovered = mutation_map(&s, &p, &mut bad);
    if !uncovered.is_empty() {
        bad.push(format!("map checks without a corruption: {uncovered:?}"));
    }
    let uncovered = mutation_width(&mut bad);
    if !uncovered.is_empty() {
        bad.push(format!("width checks without a corruption: {uncovered:?}"));
    }
    mutation_misc(&mut bad);
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{} divergence, {} map corruptions plus width, net, rank-one and oracle",
                Corruption::ALL.len(),
                MapCorruption::ALL.len()
            )
        } else {
            bad.join(" | ")
        },
    )
}

#[test]
fn acceptance() {
    let fx = div_fixtures();
    let jac = jac_fixtures();
    let widths = width_cases();
    let results: Vec<(&str, Outcome)> = vec![
        ("divergence contract", divergence_contract(&fx)),
        ("jacobian contract", jacobian_contract(&jac)),
        ("residual decay", residual_decay(&fx, &jac)),
        ("width lemma", width_lemma(&widths)),
        ("direction nets", nets()),
        ("rank-one determinant", rank_one()),
        ("diffeomorphism perturbation", corollary()),
        ("background field", background()),
        ("gradient oracle", gradient_oracle(&fx, &jac, &widths)),
        ("mutation tests", mutations()),
    ];
    // bypasses libtest capture
    let mut summary = String::from("\n");
    for (i, (name, o)) in results.iter().enumerate() {
        summary += &format!("[{}] {:>2} {name}: {}\n", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    std::io::stderr().write_all(summary.as_bytes()).unwrap();
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
