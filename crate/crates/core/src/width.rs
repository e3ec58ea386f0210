//! Width functions: `0 <= phi <= zeta`, `0 <= d_e phi <= 1` with equality on the target,
//! and transverse slopes below `1/tan(alpha)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{default_plateau, CoverProfile, Expr, ExprRef, FieldError, Prim};
use crate::geometry::{Aabb, Cone};
use crate::measures::{AtomCloud, Certificate};
use crate::report::{Check, Report, Worst};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WidthError {
    #[error("zeta must be positive and finite, got {0}")]
    BadZeta(f64),
    #[error("certificate does not match the cone: {0}")]
    Mismatch(String),
    #[error("atom {atom} is off the carrier (transverse coordinate {offset})")]
    OffCarrier { atom: usize, offset: f64 },
    #[error("cover needs generation {needed}, cap is {cap}")]
    CapExceeded { needed: usize, cap: usize },
    #[error("empty target set")]
    EmptyTarget,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WidthFunction<T> {
    pub phi: ExprRef<T>,
    pub cone: Cone<T>,
    pub zeta: T,
    pub target: Vec<Vec<T>>,
    /// Certified bound of `|D phi|`.
    pub grad_bound: T,
    /// Certified bound of `|d_v phi|` over unit `v` orthogonal to the axis.
    pub transverse_bound: T,
}

pub(crate) struct Built<T> {
    pub phi: ExprRef<T>,
    pub grad_bound: T,
    pub transverse_bound: T,
}

fn merge<T: Real>(mut iv: Vec<(T, T)>, min_gap: T) -> Vec<(T, T)> {
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(T, T)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a - last.1 <= min_gap => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Pads every interval so targets sit well inside, then fits ramps into the gaps
/// with total rise at most `zeta`.
fn cover_from_intervals<T: Real>(raw: Vec<(T, T)>, zeta: T) -> Result<CoverProfile<T>, WidthError> {
    let iv = merge(raw, T::zero());
    let pad_floor = zeta / T::lit(16.0 * iv.len() as f64);
    let padded: Vec<(T, T)> = iv
        .iter()
        .map(|&(a, b)| {
            let p = (T::lit(0.1) * (b - a)).max(pad_floor);
            (a - p, b + p)
        })
        .collect();
    let iv = merge(padded, T::zero());
    let len = iv.iter().fold(T::zero(), |acc, &(a, b)| acc + (b - a));
    let ramp = (zeta - len) / T::lit(4.0 * iv.len() as f64);
    if !(ramp > T::zero()) {
        return Err(WidthError::BadZeta(zeta.to_f64_lossy()));
    }
    let iv = merge(iv, ramp * T::lit(2.0001));
    let profile = CoverProfile::new(iv, ramp)?;
    debug_assert!(profile.rise() <= zeta);
    Ok(profile)
}

fn generation_for<T: Real>(len0: T, ratio_sum: T, zeta: T) -> usize {
    let half = zeta * T::lit(0.5);
    if len0 <= half {
        return 0;
    }
    let guess = ((half / len0).ln() / ratio_sum.ln()).to_f64_lossy().ceil().max(0.0) as usize;
    let mut n = guess.saturating_sub(2);
    while len0 * ratio_sum.powi(n as i32) > half {
        n += 1;
    }
    n
}

/// Builds `phi` for atoms of one piece. `locals` are IFS addresses at `generation`.
pub(crate) fn build<T: Real>(
    cert: &Certificate<T>,
    points: &[&[T]],
    locals: &[usize],
    generation: usize,
    anchor: &[T],
    zeta: T,
) -> Result<Built<T>, WidthError> {
    if !(zeta > T::zero() && zeta.is_finite()) {
        return Err(WidthError::BadZeta(zeta.to_f64_lossy()));
    }
    if points.is_empty() {
        return Err(WidthError::EmptyTarget);
    }
    match cert {
        Certificate::Graph {
            height_axis,
            sign,
            profile,
            lip_profile,
            ..
        } => {
            let h = default_plateau(zeta)?;
            let s = Expr::scale(*sign, Expr::sub(Expr::coord(*height_axis), profile.clone()));
            let tol = zeta * T::lit(0.25 * 0.9);
            for (i, p) in points.iter().enumerate() {
                let off = s.value(p);
                if off.abs() > tol {
                    return Err(WidthError::OffCarrier {
                        atom: i,
                        offset: off.to_f64_lossy(),
                    });
                }
            }
            Ok(Built {
                phi: Expr::apply(Prim::Cover { profile: h }, s),
                grad_bound: (T::one() + *lip_profile * *lip_profile).sqrt(),
                transverse_bound: *lip_profile,
            })
        }
        Certificate::Ifs {
            carrier,
            axis,
            initial_length,
            ratio_sum,
        } => {
            let n = generation_for(*initial_length, *ratio_sum, zeta);
            if n > carrier.generation_cap {
                return Err(WidthError::CapExceeded {
                    needed: n,
                    cap: carrier.generation_cap,
                });
            }
            let q = |x: &[T]| (0..x.len()).fold(T::zero(), |acc, k| acc + axis[k] * (x[k] - anchor[k]));
            let half_proj = |b: &Aabb<T>| (0..axis.len()).fold(T::zero(), |acc, k| acc + axis[k].abs() * b.extent(k)) * T::lit(0.5);
            let raw: Vec<(T, T)> = if n <= generation {
                let m = carrier.maps.len();
                let stride = m.pow((generation - n) as u32);
                let mut cells: BTreeMap<usize, (T, T)> = BTreeMap::new();
                for (p, &loc) in points.iter().zip(locals) {
                    let qa = q(p);
                    let e = cells.entry(loc / stride).or_insert_with(|| {
                        let b = carrier.cell_box(&carrier.ancestor(loc, generation, n));
                        let c = q(&b.center());
                        let r = half_proj(&b);
                        (c - r, c + r)
                    });
                    e.0 = e.0.min(qa);
                    e.1 = e.1.max(qa);
                }
                cells.into_values().collect()
            } else {
                let shrink = ratio_sum.powi((n - generation) as i32);
                points
                    .iter()
                    .zip(locals)
                    .map(|(p, &loc)| {
                        let qa = q(p);
                        let r = *initial_length * carrier.address_scale(loc, generation) * shrink * T::lit(0.5);
                        (qa - r, qa + r)
                    })
                    .collect()
            };
            let profile = cover_from_intervals(raw, zeta)?;
            Ok(Built {
                phi: Expr::apply(Prim::Cover { profile }, Expr::linear(axis.clone(), anchor.to_vec())),
                grad_bound: T::one(),
                transverse_bound: T::zero(),
            })
        }
        Certificate::Discrete { axis } => {
            let q = |x: &[T]| (0..x.len()).fold(T::zero(), |acc, k| acc + axis[k] * (x[k] - anchor[k]));
            let raw = points.iter().map(|p| (q(p), q(p))).collect();
            let profile = cover_from_intervals(raw, zeta)?;
            Ok(Built {
                phi: Expr::apply(Prim::Cover { profile }, Expr::linear(axis.clone(), anchor.to_vec())),
                grad_bound: T::one(),
                transverse_bound: T::zero(),
            })
        }
    }
}

fn check_cone<T: Real>(cert: &Certificate<T>, cone: &Cone<T>) -> Result<(), WidthError> {
    let axis = cone.axis.as_slice();
    let same = |a: &[T]| a.iter().zip(axis).all(|(x, y)| x == y);
    match cert {
        Certificate::Graph {
            height_axis,
            sign,
            cot_alpha,
            ..
        } => {
            if cone.axis.coordinate_axis() != Some((*height_axis, *sign)) {
                return Err(WidthError::Mismatch("graph certificate issued for another axis".into()));
            }
            if cone.cot() > *cot_alpha {
                return Err(WidthError::Mismatch("cone is narrower than the certified one".into()));
            }
            Ok(())
        }
        Certificate::Ifs { axis: a, .. } | Certificate::Discrete { axis: a } => {
            if same(a) {
                Ok(())
            } else {
                Err(WidthError::Mismatch("certificate issued for another axis".into()))
            }
        }
    }
}

fn heaviest<T: Real>(e: &AtomCloud<T>) -> usize {
    let mut best = 0;
    for i in 1..e.len() {
        if e.weights[i] > e.weights[best] {
            best = i;
        }
    }
    best
}

/// Width function for the atoms of `e`, all drawn from the certified piece.
pub fn width_function<T: Real>(cert: &Certificate<T>, e: &AtomCloud<T>, cone: &Cone<T>, zeta: T) -> Result<WidthFunction<T>, WidthError> {
    check_cone(cert, cone)?;
    if e.is_empty() {
        return Err(WidthError::EmptyTarget);
    }
    let points: Vec<&[T]> = e.points.iter().map(Vec::as_slice).collect();
    let generation = e.piece.first().map_or(0, |&p| e.generation.get(p).copied().unwrap_or(0));
    let anchor = e.points[heaviest(e)].clone();
    let b = build(cert, &points, &e.local, generation, &anchor, zeta)?;
    Ok(WidthFunction {
        phi: b.phi,
        cone: cone.clone(),
        zeta,
        target: e.points.clone(),
        grad_bound: b.grad_bound,
        transverse_bound: b.transverse_bound,
    })
}

pub fn width_for_graph<T: Real>(cert: &Certificate<T>, e: &AtomCloud<T>, cone: &Cone<T>, zeta: T) -> Result<WidthFunction<T>, WidthError> {
    if !matches!(cert, Certificate::Graph { .. }) {
        return Err(WidthError::Mismatch("expected a graph certificate".into()));
    }
    width_function(cert, e, cone, zeta)
}

pub fn width_for_ifs<T: Real>(cert: &Certificate<T>, e: &AtomCloud<T>, cone: &Cone<T>, zeta: T) -> Result<WidthFunction<T>, WidthError> {
    if !matches!(cert, Certificate::Ifs { .. }) {
        return Err(WidthError::Mismatch("expected an IFS certificate".into()));
    }
    width_function(cert, e, cone, zeta)
}

/// Grid points of `region` plus, for each target atom, a short line of points along the axis.
fn probe_points<T: Real>(w: &WidthFunction<T>, region: &Aabb<T>, res: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = region.cast::<f64>().grid(res, false);
    let e: Vec<f64> = w.cone.axis.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let z = w.zeta.to_f64_lossy();
    let stride = (w.target.len() / 2000).max(1);
    for a in w.target.iter().step_by(stride) {
        for j in -16i32..=16 {
            let s = j as f64 * z / 16.0;
            pts.push(a.iter().zip(&e).map(|(x, v)| x.to_f64_lossy() + s * v).collect());
        }
    }
    pts
}

/// Checks (i)-(iii), the `c_alpha` gradient bound and exactness on the target.
pub fn verify_width<T: Real>(w: &WidthFunction<T>, region: &Aabb<T>, grid_resolution: usize) -> Report {
    let e: Vec<T> = w.cone.axis.as_slice().to_vec();
    let zeta = w.zeta.to_f64_lossy();
    let cot = w.cone.cot().to_f64_lossy();
    let c_alpha = w.cone.c_alpha().to_f64_lossy();
    let pts = probe_points(w, region, grid_resolution);
    let eval = |x: &[f64]| {
        let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
        let (v, g) = w.phi.value_grad(&xt);
        let de = g.iter().zip(&e).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
        let perp = g
            .iter()
            .zip(&e)
            .fold(T::zero(), |acc, (a, b)| {
                let r = *a - de * *b;
                acc + r * r
            })
            .sqrt();
        let norm = g.iter().fold(T::zero(), |acc, a| acc + *a * *a).sqrt();
        [v, de, perp, norm].map(|t| t.to_f64_lossy())
    };
    let init = || [Worst::new(), Worst::new(), Worst::new(), Worst::new(), Worst::new(), Worst::new()];
    let fold = |mut acc: [Worst; 6], x: &Vec<f64>| {
        let [v, de, perp, norm] = eval(x);
        acc[0].see(-v, x);
        acc[1].see(v, x);
        acc[2].see(-de, x);
        acc[3].see(de, x);
        acc[4].see(perp, x);
        acc[5].see(norm, x);
        acc
    };
    let worst = pts.par_iter().fold(init, fold).reduce(init, |a, b| {
        let mut it = b.into_iter();
        a.map(|w| w.merge(it.next().unwrap()))
    });
    let mut atom = Worst::new();
    for a in &w.target {
        let x: Vec<f64> = a.iter().map(|v| v.to_f64_lossy()).collect();
        atom.see((eval(&x)[1] - 1.0).abs(), &x);
    }
    let [neg_v, v, neg_de, de, perp, norm] = worst;
    Report::new(vec![
        Check::at_most("phi_lower", neg_v.value_or_zero(), 1e-12, neg_v.at),
        Check::at_most("phi_upper", v.value_or_zero(), zeta + 1e-9, v.at),
        Check::at_most("axial_slope_lower", neg_de.value_or_zero(), 1e-9, neg_de.at),
        Check::at_most("axial_slope_upper", de.value_or_zero(), 1.0 + 1e-9, de.at),
        Check::at_most("axial_slope_on_target", atom.value_or_zero(), 1e-9, atom.at),
        Check::at_most("transverse_slope", perp.value_or_zero(), cot + 1e-9, perp.at),
        Check::at_most("gradient_norm", norm.value_or_zero(), c_alpha + 1e-9, norm.at),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;
    use crate::geometry::Direction;
    use crate::measures::{cone_null_certificate, sample_atoms, Carrier, GraphCarrier, IfsCarrier, ModelMeasure, Piece, Similarity};
    use std::f64::consts::FRAC_PI_4;

    fn omega() -> Aabb<f64> {
        Aabb::cube(2, -2.0, 2.0)
    }

    fn cantor() -> ModelMeasure<f64> {
        let r = 1.0 / 3.0;
        let f = IfsCarrier::new(
            vec![
                Similarity {
                    ratio: r,
                    translation: vec![0.0, 0.0],
                },
                Similarity {
                    ratio: r,
                    translation: vec![2.0 / 3.0, 0.0],
                },
            ],
            Aabb::new(vec![0.0, 0.0], vec![1.0, 0.0]),
            8,
            200,
            &omega(),
        )
        .unwrap();
        ModelMeasure::new(
            omega(),
            vec![Piece {
                carrier: Carrier::Ifs(f),
                weight: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn cantor_generation_choice() {
        assert_eq!(generation_for(1.0, 2.0 / 3.0, 0.1), 8);
        assert!((2.0f64 / 3.0).powi(8) <= 0.05 && (2.0f64 / 3.0).powi(7) > 0.05);
        let m = cantor();
        let e = sample_atoms(&m, 8).unwrap();
        assert_eq!(e.len(), 256);
        let cone = Cone::new(Direction::axis(2, 0, 1.0), FRAC_PI_4).unwrap();
        let Carrier::Ifs(f) = &m.pieces[0].carrier else { unreachable!() };
        let cert = cone_null_certificate(&Carrier::Ifs(f.clone()), &cone).unwrap();
        let w = width_for_ifs(&cert, &e, &cone, 0.1).unwrap();
        let rep = verify_width(&w, &Aabb::new(vec![-0.5, -0.5], vec![1.5, 0.5]), 400);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn flat_segment() {
        let g = GraphCarrier::new(1, parse_expr("0", 2).unwrap(), Aabb::new(vec![0.0, 0.0], vec![1.0, 0.0]), &omega()).unwrap();
        let m = ModelMeasure::new(
            omega(),
            vec![Piece {
                carrier: Carrier::Graph(g.clone()),
                weight: 1.0,
            }],
        )
        .unwrap();
        let e = sample_atoms(&m, 50).unwrap();
        let cone = Cone::new(Direction::axis(2, 1, 1.0), FRAC_PI_4).unwrap();
        let cert = cone_null_certificate(&Carrier::Graph(g), &cone).unwrap();
        let w = width_for_graph(&cert, &e, &cone, 0.1).unwrap();
        let h = default_plateau(0.1).unwrap();
        for x in [-0.3, -0.02, 0.0, 0.01, 0.2] {
            let (v, gr) = w.phi.value_grad(&[0.4, x]);
            assert_eq!(v, h.eval(x).0);
            assert_eq!(gr[0], 0.0);
        }
        assert!(verify_width(&w, &Aabb::new(vec![-0.5, -0.5], vec![1.5, 0.5]), 200).pass);
    }

    #[test]
    fn sine_graph_transverse_slope() {
        let g = GraphCarrier::new(
            1,
            parse_expr("0.5*sin(x1)", 2).unwrap(),
            Aabb::new(vec![-1.0, 0.0], vec![1.0, 0.0]),
            &omega(),
        )
        .unwrap();
        let m = ModelMeasure::new(
            omega(),
            vec![Piece {
                carrier: Carrier::Graph(g.clone()),
                weight: 1.0,
            }],
        )
        .unwrap();
        let e = sample_atoms(&m, 300).unwrap();
        let cone = Cone::new(Direction::axis(2, 1, 1.0), FRAC_PI_4).unwrap();
        let cert = cone_null_certificate(&Carrier::Graph(g), &cone).unwrap();
        let w = width_for_graph(&cert, &e, &cone, 0.1).unwrap();
        let rep = verify_width(&w, &Aabb::new(vec![-1.2, -1.0], vec![1.2, 1.0]), 200);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("transverse_slope").unwrap().worst <= 0.5 + 1e-12);
    }

    #[test]
    fn corruptions_are_caught() {
        let g = GraphCarrier::new(1, parse_expr("0", 2).unwrap(), Aabb::new(vec![0.0, 0.0], vec![1.0, 0.0]), &omega()).unwrap();
        let m = ModelMeasure::new(
            omega(),
            vec![Piece {
                carrier: Carrier::Graph(g.clone()),
                weight: 1.0,
            }],
        )
        .unwrap();
        let e = sample_atoms(&m, 20).unwrap();
        let cone = Cone::new(Direction::axis(2, 1, 1.0), FRAC_PI_4).unwrap();
        let cert = cone_null_certificate(&Carrier::Graph(g), &cone).unwrap();
        let region = Aabb::new(vec![-0.5, -0.5], vec![1.5, 0.5]);
        let w = width_for_graph(&cert, &e, &cone, 0.1).unwrap();
        let mut scaled = w.clone();
        scaled.phi = Expr::scale(1.5, w.phi.clone());
        let rep = verify_width(&scaled, &region, 100);
        assert!(!rep.get("axial_slope_upper").unwrap().pass);
        assert!(rep.get("axial_slope_upper").unwrap().witness.is_some());
        let mut halved = w.clone();
        halved.zeta = 0.05;
        assert!(!verify_width(&halved, &region, 100).get("phi_upper").unwrap().pass);
    }

    #[test]
    fn shrinking_zeta_keeps_properties() {
        let m = cantor();
        let e = sample_atoms(&m, 6).unwrap();
        let cone = Cone::new(Direction::normalize(&[1.0, 0.2]).unwrap(), FRAC_PI_4).unwrap();
        let Carrier::Ifs(f) = &m.pieces[0].carrier else { unreachable!() };
        let cert = cone_null_certificate(&Carrier::Ifs(f.clone()), &cone).unwrap();
        for zeta in [1e-1, 1e-2, 1e-3, 1e-4] {
            let w = width_for_ifs(&cert, &e, &cone, zeta).unwrap();
            let rep = verify_width(&w, &Aabb::new(vec![-0.5, -0.5], vec![1.5, 0.5]), 100);
            assert!(rep.pass, "zeta {zeta}: {rep:?}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = cantor();
        let e = sample_atoms(&m, 4).unwrap();
        let cone = Cone::new(Direction::axis(2, 0, 1.0), FRAC_PI_4).unwrap();
        let Carrier::Ifs(f) = &m.pieces[0].carrier else { unreachable!() };
        let mut f = f.clone();
        f.generation_cap = 5;
        let cert = cone_null_certificate(&Carrier::Ifs(f), &cone).unwrap();
        assert!(matches!(width_for_ifs(&cert, &e, &cone, 1e-3), Err(WidthError::CapExceeded { .. })));
    }
}
