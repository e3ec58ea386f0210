//! Planar fixtures: horizontal segments, graphs over the first axis and middle-thirds Cantor sets.

use crate::fields::parse_expr;
use crate::geometry::Aabb;
use crate::measures::{Carrier, GraphCarrier, IfsCarrier, MeasureError, ModelMeasure, Piece, Similarity};
use crate::scalar::Real;

/// The square `(-1, 1)^2`.
pub fn square<T: Real>() -> Aabb<T> {
    Aabb::cube(2, -T::one(), T::one())
}

/// Graph `x2 = profile(x1)` over `[lo, hi]`.
pub fn graph<T: Real>(omega: &Aabb<T>, profile: &str, lo: T, hi: T) -> Result<Carrier<T>, MeasureError> {
    let p = parse_expr(profile, 2).map_err(|e| MeasureError::Malformed(e.to_string()))?;
    let g = GraphCarrier::new(1, p, Aabb::new(vec![lo, T::zero()], vec![hi, T::zero()]), omega)?;
    Ok(Carrier::Graph(g))
}

pub fn segment<T: Real>(omega: &Aabb<T>, lo: T, hi: T) -> Result<Carrier<T>, MeasureError> {
    graph(omega, "0", lo, hi)
}

/// Middle-thirds Cantor set on `[lo, hi] x {0}`.
pub fn cantor<T: Real>(omega: &Aabb<T>, lo: T, hi: T, generation: usize) -> Result<Carrier<T>, MeasureError> {
    let r = T::lit(1.0 / 3.0);
    let keep = T::one() - r;
    let f = IfsCarrier::new(
        vec![
            Similarity {
                ratio: r,
                translation: vec![lo * keep, T::zero()],
            },
            Similarity {
                ratio: r,
                translation: vec![hi * keep, T::zero()],
            },
        ],
        Aabb::new(vec![lo, T::zero()], vec![hi, T::zero()]),
        generation,
        200,
        omega,
    )?;
    Ok(Carrier::Ifs(f))
}

/// Measure on `omega` with the given carriers and masses.
pub fn measure<T: Real>(omega: Aabb<T>, pieces: Vec<(Carrier<T>, T)>) -> Result<ModelMeasure<T>, MeasureError> {
    ModelMeasure::new(
        omega,
        pieces.into_iter().map(|(carrier, weight)| Piece { carrier, weight }).collect(),
    )
}

/// Unit-mass segment `[-0.5, 0.5] x {0}` in the square.
pub fn segment_measure<T: Real>() -> ModelMeasure<T> {
    let o = square();
    let c = segment(&o, T::lit(-0.5), T::lit(0.5)).expect("fixture");
    measure(o, vec![(c, T::one())]).expect("fixture")
}

/// Unit-mass graph of `0.04 sin(x1)` over `[-0.5, 0.5]`.
pub fn sine_measure<T: Real>() -> ModelMeasure<T> {
    let o = square();
    let c = graph(&o, "0.04*sin(x1)", T::lit(-0.5), T::lit(0.5)).expect("fixture");
    measure(o, vec![(c, T::one())]).expect("fixture")
}

/// Unit-mass Cantor set on `[-0.5, 0.5] x {0}`.
pub fn cantor_measure<T: Real>(generation: usize) -> ModelMeasure<T> {
    let o = square();
    let c = cantor(&o, T::lit(-0.5), T::lit(0.5), generation).expect("fixture");
    measure(o, vec![(c, T::one())]).expect("fixture")
}

/// Segment `[-0.9, -0.1]` of mass 0.5 and Cantor set on `[0.1, 0.9]` of mass 0.5.
pub fn union_measure<T: Real>(generation: usize) -> ModelMeasure<T> {
    let o = square();
    let s = segment(&o, T::lit(-0.9), T::lit(-0.1)).expect("fixture");
    let c = cantor(&o, T::lit(0.1), T::lit(0.9), generation).expect("fixture");
    measure(o, vec![(s, T::lit(0.5)), (c, T::lit(0.5))]).expect("fixture")
}

/// Segment `[-0.5, 0.5] x {0}` of mass 0.9 and the steep graph `x2 = 0.3 + 0.5 x1` over
/// `[0.1, 0.5]` of mass 0.1. At `delta = 0.5` no cone of the net certifies the graph.
pub fn partial_measure<T: Real>() -> ModelMeasure<T> {
    let o = square();
    let s = segment(&o, T::lit(-0.5), T::lit(0.5)).expect("fixture");
    let g = graph(&o, "0.3 + 0.5*x1", T::lit(0.1), T::lit(0.5)).expect("fixture");
    measure(o, vec![(s, T::lit(0.9)), (g, T::lit(0.1))]).expect("fixture")
}
