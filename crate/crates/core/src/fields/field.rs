use serde::{Deserialize, Serialize};

use super::expr::{Expr, ExprRef};
use super::Interval;
use crate::geometry::Aabb;
use crate::scalar::{dot, Real};

/// Scalar field; when `support` is set the field and its gradient vanish outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScalarField<T> {
    pub expr: ExprRef<T>,
    pub support: Option<Aabb<T>>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(expr: ExprRef<T>) -> Self {
        Self { expr, support: None }
    }

    pub fn with_support(expr: ExprRef<T>, support: Aabb<T>) -> Self {
        Self {
            expr,
            support: Some(support),
        }
    }

    pub fn zero() -> Self {
        Self::new(Expr::zero())
    }

    pub fn eval(&self, x: &[T]) -> T {
        match &self.support {
            Some(s) if !s.contains(x) => T::zero(),
            _ => self.expr.value(x),
        }
    }

    pub fn value_grad(&self, x: &[T]) -> (T, Vec<T>) {
        match &self.support {
            Some(s) if !s.contains(x) => (T::zero(), vec![T::zero(); x.len()]),
            _ => self.expr.value_grad(x),
        }
    }

    pub fn grad(&self, x: &[T]) -> Vec<T> {
        self.value_grad(x).1
    }

    fn clip(&self, b: &Aabb<T>) -> Option<Aabb<T>> {
        match &self.support {
            Some(s) => s.intersection(b),
            None => Some(b.clone()),
        }
    }

    pub fn bounds(&self, b: &Aabb<T>) -> Interval<T> {
        match self.clip(b) {
            Some(c) => {
                let i = self.expr.bounds(&c);
                if self.support.as_ref().is_some_and(|s| !s.contains_box(b)) {
                    i.hull(&Interval::point(T::zero()))
                } else {
                    i
                }
            }
            None => Interval::point(T::zero()),
        }
    }

    /// Certified upper bound of `|f|` on `b`.
    pub fn sup_certificate(&self, b: &Aabb<T>) -> T {
        self.bounds(b).mag()
    }

    /// Certified upper bound of `|grad f|` on `b`.
    pub fn grad_sup_certificate(&self, b: &Aabb<T>) -> T {
        self.clip(b).map_or(T::zero(), |c| self.expr.grad_bound(&c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VectorTerm<T> {
    pub scalar: ScalarField<T>,
    pub direction: Vec<T>,
}

/// `V(x) = sum_i s_i(x) v_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VectorField<T> {
    pub dim: usize,
    pub terms: Vec<VectorTerm<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    /// Field with component `i` given by `components[i]`.
    pub fn from_components(components: Vec<ExprRef<T>>) -> Self {
        let dim = components.len();
        let terms = components
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let mut v = vec![T::zero(); dim];
                v[i] = T::one();
                VectorTerm {
                    scalar: ScalarField::new(e),
                    direction: v,
                }
            })
            .collect();
        Self { dim, terms }
    }

    pub fn push(&mut self, scalar: ScalarField<T>, direction: Vec<T>) {
        self.terms.push(VectorTerm { scalar, direction });
    }

    pub fn extend(&mut self, other: &Self) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for t in &self.terms {
            let s = t.scalar.eval(x);
            if s != T::zero() {
                for k in 0..self.dim {
                    out[k] = out[k] + s * t.direction[k];
                }
            }
        }
        out
    }

    /// `DV(x)` as rows: `DV[a][b] = d V_a / d x_b`.
    pub fn jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut j = vec![vec![T::zero(); self.dim]; self.dim];
        for t in &self.terms {
            let g = t.scalar.grad(x);
            for a in 0..self.dim {
                if t.direction[a] == T::zero() {
                    continue;
                }
                for b in 0..self.dim {
                    j[a][b] = j[a][b] + t.direction[a] * g[b];
                }
            }
        }
        j
    }

    /// `div V(x) = sum_i grad s_i(x) . v_i`.
    pub fn divergence(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, t| acc + dot(&t.scalar.grad(x), &t.direction))
    }
}

/// `Phi(x) = B(x) + D(B(x))` with `B` the identity when `base` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MapField<T> {
    pub base: Option<Vec<ExprRef<T>>>,
    pub displacement: VectorField<T>,
}

impl<T: Real> MapField<T> {
    pub fn identity_plus(displacement: VectorField<T>) -> Self {
        Self { base: None, displacement }
    }

    pub fn dim(&self) -> usize {
        self.displacement.dim
    }

    pub fn base_point(&self, x: &[T]) -> Vec<T> {
        match &self.base {
            None => x.to_vec(),
            Some(f) => f.iter().map(|c| c.value(x)).collect(),
        }
    }

    pub fn base_jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        let d = self.dim();
        match &self.base {
            None => identity(d),
            Some(f) => f.iter().map(|c| c.grad(x)).collect(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let y = self.base_point(x);
        let v = self.displacement.eval(&y);
        y.iter().zip(&v).map(|(&a, &b)| a + b).collect()
    }

    /// `DPhi(x) = (I + DD(B x)) DB(x)`.
    pub fn jacobian(&self, x: &[T]) -> Vec<Vec<T>> {
        let d = self.dim();
        let y = self.base_point(x);
        let mut outer = self.displacement.jacobian(&y);
        for (k, row) in outer.iter_mut().enumerate() {
            row[k] = row[k] + T::one();
        }
        if self.base.is_none() {
            return outer;
        }
        let inner = self.base_jacobian(x);
        matmul(&outer, &inner, d)
    }
}

pub(crate) fn identity<T: Real>(d: usize) -> Vec<Vec<T>> {
    (0..d)
        .map(|a| (0..d).map(|b| if a == b { T::one() } else { T::zero() }).collect())
        .collect()
}

pub(crate) fn matmul<T: Real>(a: &[Vec<T>], b: &[Vec<T>], d: usize) -> Vec<Vec<T>> {
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j])).collect())
        .collect()
}

/// Central-difference gradient with per-axis effective steps `fl(x + h) - x`.
pub fn central_gradient<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let xp = x[k] + h;
            let xm = x[k] - h;
            p[k] = xp;
            let fp = f(&p);
            p[k] = xm;
            let fm = f(&p);
            p[k] = x[k];
            let span = xp - xm;
            if span == T::zero() {
                T::nan()
            } else {
                (fp - fm) / span
            }
        })
        .collect()
}

/// Central difference of `f` along `v` with step `h`, using the rounded displacement.
pub fn central_directional<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], v: &[T], h: T) -> T {
    let xp: Vec<T> = x.iter().zip(v).map(|(&a, &b)| a + h * b).collect();
    let xm: Vec<T> = x.iter().zip(v).map(|(&a, &b)| a - h * b).collect();
    // project the realized displacement on v so rounding of x +- h v is accounted for
    let span = xp.iter().zip(&xm).zip(v).fold(T::zero(), |acc, ((&a, &b), &c)| acc + (a - b) * c);
    if span == T::zero() {
        return T::nan();
    }
    (f(&xp) - f(&xm)) / span
}
