//! Expression trees with exact value/gradient evaluation and interval bounds.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bump::Bump;
use super::disjoint::DisjointSum;
use super::profile::{CoverProfile, SmoothClamp};
use super::{FieldError, Interval};
use crate::geometry::Aabb;
use crate::scalar::Real;

pub type ExprRef<T> = Arc<Expr<T>>;

/// Smooth one-dimensional primitive applied to a scalar argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum Prim<T> {
    Sin,
    Cos,
    Exp,
    /// `sum_i c_i t^i`.
    Poly {
        coeffs: Vec<T>,
    },
    /// Antiderivative of a cover indicator; see [`CoverProfile`].
    Cover {
        profile: CoverProfile<T>,
    },
    Clamp {
        clamp: SmoothClamp<T>,
    },
}

impl<T: Real> Prim<T> {
    pub fn cast<U: Real>(&self) -> Prim<U> {
        match self {
            Prim::Sin => Prim::Sin,
            Prim::Cos => Prim::Cos,
            Prim::Exp => Prim::Exp,
            Prim::Poly { coeffs } => Prim::Poly {
                coeffs: coeffs.iter().map(|c| U::lit(c.to_f64_lossy())).collect(),
            },
            Prim::Cover { profile } => Prim::Cover { profile: profile.cast() },
            Prim::Clamp { clamp } => Prim::Clamp { clamp: clamp.cast() },
        }
    }

    /// `(f(t), f'(t))`.
    pub fn eval(&self, t: T) -> (T, T) {
        match self {
            Prim::Sin => (t.sin(), t.cos()),
            Prim::Cos => (t.cos(), -t.sin()),
            Prim::Exp => {
                let e = t.exp();
                (e, e)
            }
            Prim::Poly { coeffs } => {
                let mut v = T::zero();
                let mut dv = T::zero();
                for &c in coeffs.iter().rev() {
                    dv = dv * t + v;
                    v = v * t + c;
                }
                (v, dv)
            }
            Prim::Cover { profile } => profile.eval(t),
            Prim::Clamp { clamp } => clamp.eval(t),
        }
    }

    pub fn bounds(&self, arg: &Interval<T>) -> Interval<T> {
        match self {
            Prim::Sin => arg.sin(),
            Prim::Cos => arg.cos(),
            Prim::Exp => arg.exp(),
            Prim::Poly { coeffs } => {
                let mut v = Interval::point(T::zero());
                for &c in coeffs.iter().rev() {
                    v = v.mul(arg).add(&Interval::point(c));
                }
                v
            }
            Prim::Cover { profile } => profile.value_bounds(arg),
            Prim::Clamp { clamp } => {
                let lo = if arg.lo.is_finite() { clamp.eval(arg.lo).0 } else { -clamp.sup() };
                let hi = if arg.hi.is_finite() { clamp.eval(arg.hi).0 } else { clamp.sup() };
                Interval::new(lo, hi).pad()
            }
        }
    }

    /// Upper bound of `|f'|` over `arg`.
    pub fn slope_bound(&self, arg: &Interval<T>) -> T {
        match self {
            Prim::Sin => arg.cos().mag(),
            Prim::Cos => arg.sin().mag(),
            Prim::Exp => arg.exp().mag(),
            Prim::Poly { coeffs } => {
                let mut v = Interval::point(T::zero());
                for (i, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    v = v.mul(arg).add(&Interval::point(c * T::lit(i as f64)));
                }
                v.mag()
            }
            Prim::Cover { profile } => profile.slope_bound(arg),
            Prim::Clamp { clamp } => {
                let m = clamp.limit + T::lit(2.0) * clamp.knee;
                if arg.hi <= -m || arg.lo >= m {
                    T::zero()
                } else {
                    T::one()
                }
            }
        }
    }

    fn symbolic_derivative(&self) -> Option<Prim<T>> {
        match self {
            Prim::Poly { coeffs } => Some(Prim::Poly {
                coeffs: coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * T::lit(i as f64)).collect(),
            }),
            _ => None,
        }
    }

    fn feature_scale(&self) -> T {
        match self {
            Prim::Cover { profile } => profile.feature_scale(),
            Prim::Clamp { clamp } => clamp.knee,
            _ => T::infinity(),
        }
    }
}

/// Closed-form C^1 scalar expression on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "op", rename_all = "snake_case")]
pub enum Expr<T> {
    Const {
        value: T,
    },
    Coord {
        index: usize,
    },
    /// `sum_k c_k (x_k - o_k)`.
    Linear {
        coeffs: Vec<T>,
        origin: Vec<T>,
    },
    Sum {
        terms: Vec<ExprRef<T>>,
    },
    Product {
        left: ExprRef<T>,
        right: ExprRef<T>,
    },
    Quotient {
        num: ExprRef<T>,
        den: ExprRef<T>,
    },
    Scale {
        factor: T,
        arg: ExprRef<T>,
    },
    Apply {
        prim: Prim<T>,
        arg: ExprRef<T>,
    },
    Bump {
        bump: Bump<T>,
    },
    Disjoint {
        sum: DisjointSum<T>,
    },
    /// `outer(map_1(x), ..., map_m(x))`.
    Compose {
        outer: ExprRef<T>,
        map: Vec<ExprRef<T>>,
    },
}

impl<T: Real> Expr<T> {
    /// The same tree over another scalar type; shared subtrees stay shared.
    pub fn cast<U: Real>(this: &ExprRef<T>) -> ExprRef<U> {
        Self::cast_memo(this, &mut HashMap::new())
    }

    fn cast_memo<U: Real>(this: &ExprRef<T>, memo: &mut HashMap<*const Expr<T>, ExprRef<U>>) -> ExprRef<U> {
        let key = Arc::as_ptr(this);
        if let Some(e) = memo.get(&key) {
            return e.clone();
        }
        let c = |v: &T| U::lit(v.to_f64_lossy());
        let out = Arc::new(match &**this {
            Expr::Const { value } => Expr::Const { value: c(value) },
            Expr::Coord { index } => Expr::Coord { index: *index },
            Expr::Linear { coeffs, origin } => Expr::Linear {
                coeffs: coeffs.iter().map(c).collect(),
                origin: origin.iter().map(c).collect(),
            },
            Expr::Sum { terms } => Expr::Sum {
                terms: terms.iter().map(|t| Self::cast_memo(t, memo)).collect(),
            },
            Expr::Product { left, right } => Expr::Product {
                left: Self::cast_memo(left, memo),
                right: Self::cast_memo(right, memo),
            },
            Expr::Quotient { num, den } => Expr::Quotient {
                num: Self::cast_memo(num, memo),
                den: Self::cast_memo(den, memo),
            },
            Expr::Scale { factor, arg } => Expr::Scale {
                factor: c(factor),
                arg: Self::cast_memo(arg, memo),
            },
            Expr::Apply { prim, arg } => Expr::Apply {
                prim: prim.cast(),
                arg: Self::cast_memo(arg, memo),
            },
            Expr::Bump { bump } => Expr::Bump { bump: bump.cast() },
            Expr::Disjoint { sum } => Expr::Disjoint {
                sum: sum.cast_with(|e| Self::cast_memo(e, memo)),
            },
            Expr::Compose { outer, map } => Expr::Compose {
                outer: Self::cast_memo(outer, memo),
                map: map.iter().map(|m| Self::cast_memo(m, memo)).collect(),
            },
        });
        memo.insert(key, out.clone());
        out
    }

    pub fn constant(value: T) -> ExprRef<T> {
        Arc::new(Expr::Const { value })
    }

    pub fn zero() -> ExprRef<T> {
        Self::constant(T::zero())
    }

    pub fn coord(index: usize) -> ExprRef<T> {
        Arc::new(Expr::Coord { index })
    }

    pub fn linear(coeffs: Vec<T>, origin: Vec<T>) -> ExprRef<T> {
        Arc::new(Expr::Linear { coeffs, origin })
    }

    pub fn as_const(&self) -> Option<T> {
        match self {
            Expr::Const { value } => Some(*value),
            _ => None,
        }
    }

    pub fn sum(terms: Vec<ExprRef<T>>) -> ExprRef<T> {
        let mut c = T::zero();
        let mut rest = Vec::new();
        for t in terms {
            match t.as_const() {
                Some(v) => c = c + v,
                None => rest.push(t),
            }
        }
        if rest.is_empty() {
            return Self::constant(c);
        }
        if c != T::zero() {
            rest.push(Self::constant(c));
        }
        if rest.len() == 1 {
            return rest.pop().expect("one term");
        }
        Arc::new(Expr::Sum { terms: rest })
    }

    pub fn add(a: ExprRef<T>, b: ExprRef<T>) -> ExprRef<T> {
        Self::sum(vec![a, b])
    }

    pub fn sub(a: ExprRef<T>, b: ExprRef<T>) -> ExprRef<T> {
        Self::sum(vec![a, Self::scale(-T::one(), b)])
    }

    pub fn product(a: ExprRef<T>, b: ExprRef<T>) -> ExprRef<T> {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Self::constant(x * y),
            (Some(x), None) => Self::scale(x, b),
            (None, Some(y)) => Self::scale(y, a),
            _ => Arc::new(Expr::Product { left: a, right: b }),
        }
    }

    pub fn quotient(num: ExprRef<T>, den: ExprRef<T>) -> ExprRef<T> {
        match (num.as_const(), den.as_const()) {
            (Some(x), _) if x == T::zero() => Self::zero(),
            (Some(x), Some(y)) => Self::constant(x / y),
            (None, Some(y)) => Self::scale(T::one() / y, num),
            _ => Arc::new(Expr::Quotient { num, den }),
        }
    }

    pub fn scale(factor: T, arg: ExprRef<T>) -> ExprRef<T> {
        if factor == T::zero() {
            return Self::zero();
        }
        if factor == T::one() {
            return arg;
        }
        if let Some(v) = arg.as_const() {
            return Self::constant(factor * v);
        }
        Arc::new(Expr::Scale { factor, arg })
    }

    pub fn neg(arg: ExprRef<T>) -> ExprRef<T> {
        Self::scale(-T::one(), arg)
    }

    pub fn apply(prim: Prim<T>, arg: ExprRef<T>) -> ExprRef<T> {
        if let Some(v) = arg.as_const() {
            return Self::constant(prim.eval(v).0);
        }
        Arc::new(Expr::Apply { prim, arg })
    }

    pub fn bump(bump: Bump<T>) -> ExprRef<T> {
        Arc::new(Expr::Bump { bump })
    }

    pub fn compose(outer: ExprRef<T>, map: Vec<ExprRef<T>>) -> ExprRef<T> {
        if outer.as_const().is_some() {
            return outer;
        }
        Arc::new(Expr::Compose { outer, map })
    }

    pub fn value(&self, x: &[T]) -> T {
        match self {
            Expr::Const { value } => *value,
            Expr::Coord { index } => x[*index],
            Expr::Linear { coeffs, origin } => coeffs
                .iter()
                .zip(origin)
                .zip(x)
                .fold(T::zero(), |acc, ((&c, &o), &xi)| acc + c * (xi - o)),
            Expr::Sum { terms } => terms.iter().fold(T::zero(), |acc, t| acc + t.value(x)),
            Expr::Product { left, right } => left.value(x) * right.value(x),
            Expr::Quotient { num, den } => num.value(x) / den.value(x),
            Expr::Scale { factor, arg } => *factor * arg.value(x),
            Expr::Apply { prim, arg } => prim.eval(arg.value(x)).0,
            Expr::Bump { bump } => bump.eval(x).0,
            Expr::Disjoint { sum } => sum.value(x),
            Expr::Compose { outer, map } => {
                let y: Vec<T> = map.iter().map(|m| m.value(x)).collect();
                outer.value(&y)
            }
        }
    }

    /// Value and exact gradient.
    pub fn value_grad(&self, x: &[T]) -> (T, Vec<T>) {
        let d = x.len();
        match self {
            Expr::Const { value } => (*value, vec![T::zero(); d]),
            Expr::Coord { index } => {
                let mut g = vec![T::zero(); d];
                g[*index] = T::one();
                (x[*index], g)
            }
            Expr::Linear { coeffs, .. } => (self.value(x), coeffs.clone()),
            Expr::Sum { terms } => {
                let mut v = T::zero();
                let mut g = vec![T::zero(); d];
                for t in terms {
                    let (tv, tg) = t.value_grad(x);
                    v = v + tv;
                    for k in 0..d {
                        g[k] = g[k] + tg[k];
                    }
                }
                (v, g)
            }
            Expr::Product { left, right } => {
                let (a, ga) = left.value_grad(x);
                let (b, gb) = right.value_grad(x);
                let g = (0..d).map(|k| ga[k] * b + a * gb[k]).collect();
                (a * b, g)
            }
            Expr::Quotient { num, den } => {
                let (a, ga) = num.value_grad(x);
                let (b, gb) = den.value_grad(x);
                let b2 = b * b;
                let g = (0..d).map(|k| (ga[k] * b - a * gb[k]) / b2).collect();
                (a / b, g)
            }
            Expr::Scale { factor, arg } => {
                let (v, g) = arg.value_grad(x);
                (*factor * v, g.into_iter().map(|gk| *factor * gk).collect())
            }
            Expr::Apply { prim, arg } => {
                let (t, gt) = arg.value_grad(x);
                let (f, df) = prim.eval(t);
                if df == T::zero() {
                    return (f, vec![T::zero(); d]);
                }
                (f, gt.into_iter().map(|gk| df * gk).collect())
            }
            Expr::Bump { bump } => bump.eval(x),
            Expr::Disjoint { sum } => sum.value_grad(x),
            Expr::Compose { outer, map } => {
                let parts: Vec<(T, Vec<T>)> = map.iter().map(|m| m.value_grad(x)).collect();
                let y: Vec<T> = parts.iter().map(|p| p.0).collect();
                let (v, go) = outer.value_grad(&y);
                let mut g = vec![T::zero(); d];
                for (i, (_, gi)) in parts.iter().enumerate() {
                    if go[i] == T::zero() {
                        continue;
                    }
                    for k in 0..d {
                        g[k] = g[k] + go[i] * gi[k];
                    }
                }
                (v, g)
            }
        }
    }

    pub fn grad(&self, x: &[T]) -> Vec<T> {
        self.value_grad(x).1
    }

    /// Certified enclosure of the values on `b`.
    pub fn bounds(&self, b: &Aabb<T>) -> Interval<T> {
        match self {
            Expr::Const { value } => Interval::point(*value),
            Expr::Coord { index } => Interval::new(b.lo[*index], b.hi[*index]),
            Expr::Linear { coeffs, origin } => {
                let mut acc = Interval::point(T::zero());
                for k in 0..coeffs.len() {
                    if coeffs[k] == T::zero() {
                        continue;
                    }
                    let xi = Interval::new(b.lo[k], b.hi[k]).sub(&Interval::point(origin[k]));
                    acc = acc.add(&xi.scale(coeffs[k]));
                }
                acc
            }
            Expr::Sum { terms } => terms.iter().fold(Interval::point(T::zero()), |acc, t| acc.add(&t.bounds(b))),
            Expr::Product { left, right } => left.bounds(b).mul(&right.bounds(b)),
            Expr::Quotient { num, den } => num.bounds(b).div(&den.bounds(b)),
            Expr::Scale { factor, arg } => arg.bounds(b).scale(*factor),
            Expr::Apply { prim, arg } => prim.bounds(&arg.bounds(b)),
            Expr::Bump { bump } => bump.value_bounds(b),
            Expr::Disjoint { sum } => sum.bounds(b),
            Expr::Compose { outer, map } => outer.bounds(&Self::image_box(map, b)),
        }
    }

    fn image_box(map: &[ExprRef<T>], b: &Aabb<T>) -> Aabb<T> {
        let ivs: Vec<Interval<T>> = map.iter().map(|m| m.bounds(b)).collect();
        Aabb::new(ivs.iter().map(|i| i.lo).collect(), ivs.iter().map(|i| i.hi).collect())
    }

    /// Certified upper bound of `|grad|` on `b`.
    pub fn grad_bound(&self, b: &Aabb<T>) -> T {
        let up = T::one() + T::epsilon() * T::lit(8.0);
        let r = match self {
            Expr::Const { .. } => T::zero(),
            Expr::Coord { .. } => T::one(),
            Expr::Linear { coeffs, .. } => crate::scalar::norm(coeffs),
            Expr::Sum { terms } => terms.iter().fold(T::zero(), |acc, t| acc + t.grad_bound(b)),
            Expr::Product { left, right } => left.bounds(b).mag() * right.grad_bound(b) + right.bounds(b).mag() * left.grad_bound(b),
            Expr::Quotient { num, den } => {
                let dv = den.bounds(b);
                let m = dv.mig();
                if m == T::zero() {
                    T::infinity()
                } else {
                    (num.grad_bound(b) * dv.mag() + num.bounds(b).mag() * den.grad_bound(b)) / (m * m)
                }
            }
            Expr::Scale { factor, arg } => factor.abs() * arg.grad_bound(b),
            Expr::Apply { prim, arg } => {
                let s = prim.slope_bound(&arg.bounds(b));
                if s == T::zero() {
                    T::zero()
                } else {
                    s * arg.grad_bound(b)
                }
            }
            Expr::Bump { bump } => bump.grad_bound(b),
            Expr::Disjoint { sum } => sum.grad_bound(b),
            Expr::Compose { outer, map } => {
                let go = outer.grad_bound(&Self::image_box(map, b));
                if go == T::zero() {
                    T::zero()
                } else {
                    let frob = map.iter().fold(T::zero(), |acc, m| {
                        let g = m.grad_bound(b);
                        acc + g * g
                    });
                    go * frob.sqrt()
                }
            }
        };
        if r.is_nan() {
            T::infinity()
        } else {
            r * up
        }
    }

    /// Whether coordinate `k` occurs anywhere in the tree.
    pub fn depends_on(&self, k: usize) -> bool {
        match self {
            Expr::Const { .. } => false,
            Expr::Coord { index } => *index == k,
            Expr::Linear { coeffs, .. } => coeffs.get(k).is_some_and(|c| *c != T::zero()),
            Expr::Sum { terms } => terms.iter().any(|t| t.depends_on(k)),
            Expr::Product { left, right } => left.depends_on(k) || right.depends_on(k),
            Expr::Quotient { num, den } => num.depends_on(k) || den.depends_on(k),
            Expr::Scale { arg, .. } | Expr::Apply { arg, .. } => arg.depends_on(k),
            Expr::Bump { .. } | Expr::Disjoint { .. } => true,
            Expr::Compose { map, .. } => map.iter().any(|m| m.depends_on(k)),
        }
    }

    /// Largest coordinate index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const { .. } => 0,
            Expr::Coord { index } => index + 1,
            Expr::Linear { coeffs, .. } => coeffs.len(),
            Expr::Sum { terms } => terms.iter().map(|t| t.arity()).max().unwrap_or(0),
            Expr::Product { left, right } => left.arity().max(right.arity()),
            Expr::Quotient { num, den } => num.arity().max(den.arity()),
            Expr::Scale { arg, .. } | Expr::Apply { arg, .. } => arg.arity(),
            Expr::Bump { bump } => bump.dim(),
            Expr::Disjoint { sum } => sum.dim(),
            Expr::Compose { map, .. } => map.iter().map(|m| m.arity()).max().unwrap_or(0),
        }
    }

    /// Smallest length scale of any piecewise primitive in the tree.
    pub fn feature_scale(&self) -> T {
        match self {
            Expr::Const { .. } | Expr::Coord { .. } | Expr::Linear { .. } => T::infinity(),
            Expr::Sum { terms } => terms.iter().map(|t| t.feature_scale()).fold(T::infinity(), T::min),
            Expr::Product { left, right } => left.feature_scale().min(right.feature_scale()),
            Expr::Quotient { num, den } => num.feature_scale().min(den.feature_scale()),
            Expr::Scale { arg, .. } => arg.feature_scale(),
            Expr::Apply { prim, arg } => prim.feature_scale().min(arg.feature_scale()),
            Expr::Bump { bump } => bump.min_margin(),
            Expr::Disjoint { sum } => sum.feature_scale(),
            Expr::Compose { outer, map } => map.iter().map(|m| m.feature_scale()).fold(outer.feature_scale(), T::min),
        }
    }

    /// Symbolic partial derivative for analytic trees.
    pub fn partial(&self, k: usize) -> Result<ExprRef<T>, FieldError> {
        Ok(match self {
            Expr::Const { .. } => Self::zero(),
            Expr::Coord { index } => Self::constant(if *index == k { T::one() } else { T::zero() }),
            Expr::Linear { coeffs, .. } => Self::constant(coeffs.get(k).copied().unwrap_or(T::zero())),
            Expr::Sum { terms } => {
                let parts = terms.iter().map(|t| t.partial(k)).collect::<Result<Vec<_>, _>>()?;
                Self::sum(parts)
            }
            Expr::Product { left, right } => Self::add(
                Self::product(left.partial(k)?, right.clone()),
                Self::product(left.clone(), right.partial(k)?),
            ),
            Expr::Quotient { num, den } => Self::quotient(
                Self::sub(
                    Self::product(num.partial(k)?, den.clone()),
                    Self::product(num.clone(), den.partial(k)?),
                ),
                Self::product(den.clone(), den.clone()),
            ),
            Expr::Scale { factor, arg } => Self::scale(*factor, arg.partial(k)?),
            Expr::Apply { prim, arg } => {
                let da = arg.partial(k)?;
                if da.as_const() == Some(T::zero()) {
                    return Ok(Self::zero());
                }
                let outer = match prim {
                    Prim::Sin => Self::apply(Prim::Cos, arg.clone()),
                    Prim::Cos => Self::neg(Self::apply(Prim::Sin, arg.clone())),
                    Prim::Exp => Self::apply(Prim::Exp, arg.clone()),
                    Prim::Poly { .. } => Self::apply(prim.symbolic_derivative().expect("poly"), arg.clone()),
                    _ => return Err(FieldError::NotSymbolic("piecewise primitive")),
                };
                Self::product(outer, da)
            }
            Expr::Bump { .. } => return Err(FieldError::NotSymbolic("bump")),
            Expr::Disjoint { .. } => return Err(FieldError::NotSymbolic("disjoint sum")),
            Expr::Compose { outer, map } => {
                let mut parts = Vec::with_capacity(map.len());
                for (i, m) in map.iter().enumerate() {
                    let dm = m.partial(k)?;
                    if dm.as_const() == Some(T::zero()) {
                        continue;
                    }
                    parts.push(Self::product(Self::compose(outer.partial(i)?, map.clone()), dm));
                }
                Self::sum(parts)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;

    #[test]
    fn constant_and_product_rule() {
        let c: ExprRef<f64> = Expr::constant(3.0);
        assert_eq!(c.value_grad(&[1.0, 2.0]), (3.0, vec![0.0, 0.0]));
        let p = Expr::product(Expr::coord(0), Expr::coord(1));
        assert_eq!(p.value_grad(&[2.0, 5.0]), (10.0, vec![5.0, 2.0]));
        let b = Aabb::cube(2, -1.0, 1.0);
        assert_eq!(c.bounds(&b), Interval::point(3.0));
    }

    #[test]
    fn symbolic_partials_match_exact() {
        let e = parse_expr::<f64>("sin(3*x1)*exp(x2)/(2+x1*x1) - x2*x2*x2", 2).unwrap();
        for p in [[0.3, -0.2], [-0.7, 0.9], [0.1, 0.1]] {
            let g = e.grad(&p);
            for k in 0..2 {
                let dk = e.partial(k).unwrap();
                assert!((dk.value(&p) - g[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compose_chain_rule() {
        let outer = parse_expr::<f64>("x1*x2", 2).unwrap();
        let map = vec![parse_expr("x1+0.3*x2", 2).unwrap(), parse_expr("2*x2", 2).unwrap()];
        let c = Expr::compose(outer, map);
        let (v, g) = c.value_grad(&[1.0, 2.0]);
        assert!((v - 6.4).abs() < 1e-12);
        // d/dx1 = 2 x2 = 4, d/dx2 = 0.3 * 2 x2 + (x1 + 0.3 x2) * 2 = 1.2 + 3.2
        assert!((g[0] - 4.0).abs() < 1e-12 && (g[1] - 4.4).abs() < 1e-12);
        let p = c.partial(1).unwrap();
        assert!((p.value(&[1.0, 2.0]) - 4.4).abs() < 1e-12);
    }
}
