use serde::{Deserialize, Serialize};

use super::profile::{smoothstep, SMOOTHSTEP_SLOPE};
use super::{FieldError, Interval};
use crate::geometry::Aabb;
use crate::scalar::Real;

/// Tensor-product cutoff: 1 on `inner`, 0 outside `outer`, cubic smoothstep across
/// each margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Bump<T> {
    pub outer: Aabb<T>,
    pub inner: Aabb<T>,
}

impl<T: Real> Bump<T> {
    pub fn cast<U: Real>(&self) -> Bump<U> {
        Bump {
            outer: self.outer.cast(),
            inner: self.inner.cast(),
        }
    }

    pub fn new(outer: Aabb<T>, inner: Aabb<T>) -> Result<Self, FieldError> {
        if outer.dim() != inner.dim() || !outer.is_valid() || !inner.is_valid() {
            return Err(FieldError::BadParameter("bump boxes malformed".into()));
        }
        for k in 0..outer.dim() {
            if !(inner.lo[k] > outer.lo[k] && outer.hi[k] > inner.hi[k]) {
                return Err(FieldError::BadParameter(format!("bump margin on axis {k} is not positive")));
            }
        }
        Ok(Self { outer, inner })
    }

    pub fn dim(&self) -> usize {
        self.outer.dim()
    }

    fn margin(&self, k: usize) -> T {
        (self.inner.lo[k] - self.outer.lo[k]).min(self.outer.hi[k] - self.inner.hi[k])
    }

    pub fn min_margin(&self) -> T {
        (0..self.dim()).map(|k| self.margin(k)).fold(T::infinity(), T::min)
    }

    fn axis(&self, k: usize, x: T) -> (T, T) {
        if x <= self.outer.lo[k] || x >= self.outer.hi[k] {
            return (T::zero(), T::zero());
        }
        if x < self.inner.lo[k] {
            let m = self.inner.lo[k] - self.outer.lo[k];
            let (s, ds) = smoothstep((x - self.outer.lo[k]) / m);
            (s, ds / m)
        } else if x > self.inner.hi[k] {
            let m = self.outer.hi[k] - self.inner.hi[k];
            let (s, ds) = smoothstep((self.outer.hi[k] - x) / m);
            (s, -ds / m)
        } else {
            (T::one(), T::zero())
        }
    }

    pub fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        let d = self.dim();
        let mut grad = vec![T::zero(); d];
        if !self.outer.contains_strictly(x) {
            return (T::zero(), grad);
        }
        if self.inner.contains(x) {
            return (T::one(), grad);
        }
        let parts: Vec<(T, T)> = (0..d).map(|k| self.axis(k, x[k])).collect();
        let value = parts.iter().fold(T::one(), |acc, p| acc * p.0);
        for k in 0..d {
            let mut g = parts[k].1;
            if g == T::zero() {
                continue;
            }
            for (l, p) in parts.iter().enumerate() {
                if l != k {
                    g = g * p.0;
                }
            }
            grad[k] = g;
        }
        (value, grad)
    }

    /// `max_k 1.5 / margin_k` for `d <= 3`; the Euclidean sum of axis bounds otherwise.
    pub fn grad_norm_bound(&self) -> T {
        let slope = T::lit(SMOOTHSTEP_SLOPE);
        let per_axis: Vec<T> = (0..self.dim()).map(|k| slope / self.margin(k)).collect();
        if self.dim() <= 3 {
            per_axis.iter().copied().fold(T::zero(), T::max)
        } else {
            per_axis.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
        }
    }

    pub fn value_bounds(&self, b: &Aabb<T>) -> Interval<T> {
        if self.inner.contains_box(b) {
            Interval::point(T::one())
        } else if !self.touches(b) {
            Interval::point(T::zero())
        } else {
            Interval::new(T::zero(), T::one())
        }
    }

    pub fn grad_bound(&self, b: &Aabb<T>) -> T {
        if self.inner.contains_box(b) || !self.touches(b) {
            T::zero()
        } else {
            self.grad_norm_bound()
        }
    }

    /// Whether `b` meets the open outer box.
    fn touches(&self, b: &Aabb<T>) -> bool {
        (0..self.dim()).all(|k| b.lo[k] < self.outer.hi[k] && self.outer.lo[k] < b.hi[k])
    }
}
