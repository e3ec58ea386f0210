use super::*;
use crate::catalog;
use crate::fields::parse_expr;
use crate::measures::{Carrier, GraphCarrier};

fn expr(s: &str) -> ExprRef<f64> {
    parse_expr(s, 2).unwrap()
}

#[test]
fn alpha_choice() {
    for delta in [2.0f64, 1.0, 0.5, 0.1, 1e-2, 1e-4] {
        let (a, dt) = pick_alpha_deltatilde(delta);
        let c = 1.0 + 1.0 / a.tan();
        assert!(dt > 0.0 && c * (1.0 + dt) < 1.0 + delta, "{delta}");
    }
    let (a, _) = pick_alpha_deltatilde(0.1f64);
    assert!(a.tan() > 10.0);
    let (a, dt) = pick_alpha_deltatilde(0.5f64);
    assert!((a.to_degrees() - 76.0).abs() < 1e-9);
    assert!((dt - ((1.5 / (1.0 + 1.0 / a.tan()) - 1.0) / 2.0)).abs() < 1e-15);
}

#[test]
fn partition_examples() {
    let net = build_direction_net(2, 76f64.to_radians()).unwrap();
    for m in [catalog::segment_measure::<f64>(), catalog::cantor_measure(6)] {
        let cloud = sample_atoms(&m, 100).unwrap();
        let certs = certificate_table(&m, &net);
        let p = partition_by_direction(&cloud, &m, &net, &certs, 0.1).unwrap();
        assert_eq!(p.groups[0].len(), cloud.len());
        assert!(p.dropped.is_empty());
    }
    // a horizontal and a vertical segment
    let o = catalog::square::<f64>();
    let h = catalog::segment(&o, -0.8, -0.2).unwrap();
    let v = GraphCarrier::new(0, expr("0.5"), Aabb::new(vec![0.0, 0.1], vec![0.0, 0.7]), &o).unwrap();
    let m = catalog::measure(o.clone(), vec![(h, 0.5), (Carrier::Graph(v), 0.5)]).unwrap();
    let cloud = sample_atoms(&m, 200).unwrap();
    let certs = certificate_table(&m, &net);
    let p = partition_by_direction(&cloud, &m, &net, &certs, 0.1).unwrap();
    let nonempty: Vec<usize> = (0..net.len()).filter(|&j| !p.groups[j].is_empty()).collect();
    assert_eq!(nonempty.len(), 2);
    let mut all: Vec<usize> = p.groups.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..cloud.len()).collect::<Vec<_>>());
    for &i in &p.groups[nonempty[0]] {
        assert_eq!(cloud.piece[i], 0);
    }
    let loc = localize(&cloud, &p, &o, 0.1).unwrap();
    assert_eq!(loc.groups.len(), 2);
    for a in &loc.groups[0].boxes {
        for b in &loc.groups[1].boxes {
            assert!(!a.intersects(b));
        }
    }
    for g in &loc.groups {
        for &i in &g.atoms {
            assert_eq!(g.cutoff.value(&cloud.points[i]), 1.0);
        }
        for h in &g.hulls {
            assert_eq!(g.cutoff.grad_bound(h), 0.0);
        }
    }
}

#[test]
fn zero_datum_gives_zero_field() {
    let p = DivergenceProblem::new(catalog::segment_measure(), expr("0"), 0.5, 0.5);
    let s = solve_divergence(&p).unwrap();
    assert_eq!(s.k.len(), s.atoms.len());
    assert_eq!(s.m, 0.0);
    assert_eq!(s.field.eval(&[0.1, 0.0]), vec![0.0, 0.0]);
    assert_eq!(s.ledger.total_dropped, 0.0);
}

#[test]
fn constant_on_segment() {
    let p = DivergenceProblem::new(catalog::segment_measure(), expr("1"), 0.5, 0.5);
    let s = solve_divergence(&p).unwrap();
    assert_eq!(s.m, 1.0);
    for x in &s.k.points {
        assert!((s.field.divergence(x) - 1.0).abs() <= 1e-9);
    }
    assert!(s.certified_lip <= 1.5);
    assert!(s.certified_sup <= 0.5);
    assert!(s.ledger.total_dropped < 0.5);
}

#[test]
fn linear_on_cantor() {
    let mut p = DivergenceProblem::new(catalog::cantor_measure(8), expr("x1"), 0.5, 0.5);
    p.options.resolution = 8;
    let s = solve_divergence(&p).unwrap();
    assert!(s.m <= 1.0);
    for x in &s.k.points {
        assert!((s.field.divergence(x) - x[0]).abs() <= 1e-9 * s.m);
    }
    assert!(s.certified_lip < 1.5 * s.m);
}

#[test]
fn background_with_matching_divergence() {
    let w = VectorField::from_components(vec![expr("x1*x2"), expr("x2")]);
    let p = DivergenceProblem::new(catalog::segment_measure(), expr("x2 + 1"), 0.5, 0.5);
    let s = perturb_background(&w, &p).unwrap();
    assert_eq!(s.m, 0.0);
    assert_eq!(s.total().eval(&[0.2, 0.3]), w.eval(&[0.2, 0.3]));
    let p = DivergenceProblem::new(catalog::segment_measure(), expr("x1"), 0.5, 0.5);
    let s = perturb_background(&w, &p).unwrap();
    let v = s.total();
    for x in &s.k.points {
        assert!((v.divergence(x) - x[0]).abs() <= 1e-9 * s.m.max(1.0));
    }
}

#[test]
fn jacobian_examples() {
    let s = solve_jacobian(&JacobianProblem::new(catalog::segment_measure(), expr("1"), 0.5, 0.5)).unwrap();
    assert_eq!(s.map.eval(&[0.3, 0.01]), vec![0.3, 0.01]);
    assert!(s.diffeo);
    let s = solve_jacobian(&JacobianProblem::new(catalog::segment_measure(), expr("1.2"), 0.5, 0.5)).unwrap();
    assert!((s.l - 0.2).abs() < 1e-15);
    assert!(s.diffeo);
    assert!((s.inverse_lip_bound.unwrap() - 1.0 / 0.7).abs() < 1e-12);
    for i in 0..s.k.len() {
        assert!((s.det_direct[i] - 1.2).abs() <= 1e-9 * 0.2 * 2.2);
        assert!((s.det_direct[i] - s.det_rank_one[i]).abs() <= 1e-12);
    }
    assert!(s.certified_lip <= 1.5 * 0.2);
}

#[test]
fn diffeomorphism_examples() {
    let dbl = Diffeomorphism {
        forward: vec![expr("2*x1"), expr("2*x2")],
        inverse: vec![expr("0.5*x1"), expr("0.5*x2")],
    };
    let s = perturb_diffeomorphism(&dbl, &JacobianProblem::new(catalog::segment_measure(), expr("4"), 0.5, 0.5)).unwrap();
    for x in [[0.1, 0.2], [-0.4, 0.0], [0.3, -0.7]] {
        assert_eq!(s.map.eval(&x), vec![2.0 * x[0], 2.0 * x[1]]);
    }
    assert_eq!(s.l, 0.0);

    let shear = Diffeomorphism {
        forward: vec![expr("x1 + 0.3*x2"), expr("x2")],
        inverse: vec![expr("x1 - 0.3*x2"), expr("x2")],
    };
    let p = JacobianProblem::new(catalog::segment_measure(), expr("1.1"), 0.5, 0.5);
    let s = perturb_diffeomorphism(&shear, &p).unwrap();
    assert!((s.l - 0.1).abs() < 1e-12);
    for i in 0..s.k.len() {
        assert!((s.det_direct[i] - 1.1).abs() <= 1e-8, "{}", s.det_direct[i]);
    }
    let push = s.push.as_ref().unwrap();
    assert!(s.certified_lip <= 1.5 * push.lip_forward * s.l);
    assert!(s.certified_sup <= 0.25);

    let id = Diffeomorphism {
        forward: vec![expr("x1"), expr("x2")],
        inverse: vec![expr("x1"), expr("x2")],
    };
    let p = JacobianProblem::new(catalog::segment_measure(), expr("1 + 0.3*sin(2*x1)"), 0.5, 0.5);
    let a = perturb_diffeomorphism(&id, &p).unwrap();
    for i in 0..a.k.len() {
        let x = &a.k.points[i];
        assert!((a.det_direct[i] - (1.0 + 0.3 * (2.0 * x[0]).sin())).abs() <= 1e-9);
    }
}
