use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::expr::ExprRef;
use super::{FieldError, Interval};
use crate::geometry::Aabb;
use crate::scalar::Real;

/// One term of a [`DisjointSum`]; `expr` vanishes with its gradient outside `support`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DisjointTerm<T> {
    pub support: Aabb<T>,
    pub expr: ExprRef<T>,
    pub value_bound: Interval<T>,
    pub grad_bound: T,
}

impl<T: Real> DisjointTerm<T> {
    pub fn new(support: Aabb<T>, expr: ExprRef<T>) -> Self {
        let value_bound = expr.bounds(&support);
        let grad_bound = expr.grad_bound(&support);
        Self {
            support,
            expr,
            value_bound,
            grad_bound,
        }
    }
}

#[derive(Clone, Debug)]
struct BucketIndex {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cells: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl BucketIndex {
    fn build<T: Real>(terms: &[DisjointTerm<T>], d: usize) -> Self {
        let boxes: Vec<Aabb<f64>> = terms.iter().map(|t| t.support.cast()).collect();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for b in &boxes {
            for k in 0..d {
                lo[k] = lo[k].min(b.lo[k]);
                hi[k] = hi[k].max(b.hi[k]);
            }
        }
        let per_axis = ((terms.len().max(1) as f64).powf(1.0 / d as f64).ceil() as usize * 2).clamp(1, 512);
        let cells: Vec<usize> = (0..d).map(|k| if hi[k] > lo[k] { per_axis } else { 1 }).collect();
        let total: usize = cells.iter().product();
        let mut index = Self {
            lo,
            hi,
            cells,
            buckets: vec![Vec::new(); total],
        };
        for (i, b) in boxes.iter().enumerate() {
            let r: Vec<(usize, usize)> = (0..d).map(|k| (index.cell(k, b.lo[k]), index.cell(k, b.hi[k]))).collect();
            index.for_each_cell(&r, |c, idx| c.buckets[idx].push(i as u32));
        }
        index
    }

    fn cell(&self, k: usize, x: f64) -> usize {
        let n = self.cells[k];
        if n == 1 {
            return 0;
        }
        let f = (x - self.lo[k]) / (self.hi[k] - self.lo[k]) * n as f64;
        (f.floor().max(0.0) as usize).min(n - 1)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.cells).rev().fold(0, |acc, (&i, &n)| acc * n + i)
    }

    fn for_each_cell(&mut self, r: &[(usize, usize)], mut f: impl FnMut(&mut Self, usize)) {
        let d = r.len();
        let mut idx: Vec<usize> = r.iter().map(|p| p.0).collect();
        loop {
            let flat = self.flat(&idx);
            f(self, flat);
            let mut k = 0;
            loop {
                if k == d {
                    return;
                }
                idx[k] += 1;
                if idx[k] <= r[k].1 {
                    break;
                }
                idx[k] = r[k].0;
                k += 1;
            }
        }
    }

    fn outside(&self, x: &[f64]) -> bool {
        x.iter().enumerate().any(|(k, &v)| v < self.lo[k] || v > self.hi[k])
    }

    fn point_candidates(&self, x: &[f64]) -> &[u32] {
        if self.outside(x) {
            return &[];
        }
        let idx: Vec<usize> = (0..x.len()).map(|k| self.cell(k, x[k])).collect();
        &self.buckets[self.flat(&idx)]
    }

    fn box_candidates(&self, b: &Aabb<f64>) -> Vec<u32> {
        let d = b.dim();
        if (0..d).any(|k| b.hi[k] < self.lo[k] || b.lo[k] > self.hi[k]) {
            return Vec::new();
        }
        let r: Vec<(usize, usize)> = (0..d).map(|k| (self.cell(k, b.lo[k]), self.cell(k, b.hi[k]))).collect();
        let mut out = Vec::new();
        let mut idx: Vec<usize> = r.iter().map(|p| p.0).collect();
        'outer: loop {
            out.extend_from_slice(&self.buckets[self.flat(&idx)]);
            let mut k = 0;
            loop {
                if k == d {
                    break 'outer;
                }
                idx[k] += 1;
                if idx[k] <= r[k].1 {
                    break;
                }
                idx[k] = r[k].0;
                k += 1;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Sum of terms with pairwise disjoint closed supports, evaluated through a bucket grid.
#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DisjointSum<T> {
    dim: usize,
    terms: Vec<DisjointTerm<T>>,
    #[serde(skip)]
    index: OnceLock<Arc<BucketIndex>>,
}

impl<T: Clone> Clone for DisjointSum<T> {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.clone(),
            index: self.index.clone(),
        }
    }
}

impl<T: PartialEq> PartialEq for DisjointSum<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.terms == other.terms
    }
}

impl<T: Real> DisjointSum<T> {
    pub(crate) fn cast_with<U: Real>(&self, expr: impl FnMut(&ExprRef<T>) -> ExprRef<U>) -> DisjointSum<U> {
        let mut expr = expr;
        let terms = self
            .terms
            .iter()
            .map(|t| DisjointTerm {
                support: t.support.cast(),
                expr: expr(&t.expr),
                value_bound: t.value_bound.cast(),
                grad_bound: U::lit(t.grad_bound.to_f64_lossy()),
            })
            .collect();
        DisjointSum {
            dim: self.dim,
            terms,
            index: OnceLock::new(),
        }
    }

    /// Rejects overlapping supports.
    pub fn new(dim: usize, terms: Vec<DisjointTerm<T>>) -> Result<Self, FieldError> {
        let s = Self {
            dim,
            terms,
            index: OnceLock::new(),
        };
        for (i, t) in s.terms.iter().enumerate() {
            if t.support.dim() != dim || !t.support.is_valid() {
                return Err(FieldError::BadParameter(format!("support {i} malformed")));
            }
            for j in s.index().box_candidates(&t.support.cast()) {
                let j = j as usize;
                if j != i && s.terms[j].support.intersects(&t.support) {
                    return Err(FieldError::OverlappingSupports(i.min(j), i.max(j)));
                }
            }
        }
        Ok(s)
    }

    fn index(&self) -> &BucketIndex {
        self.index.get_or_init(|| Arc::new(BucketIndex::build(&self.terms, self.dim)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[DisjointTerm<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Index of the term whose support contains `x`.
    pub fn active_term(&self, x: &[T]) -> Option<usize> {
        if self.terms.is_empty() {
            return None;
        }
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        self.index()
            .point_candidates(&xf)
            .iter()
            .map(|&i| i as usize)
            .find(|&i| self.terms[i].support.contains(x))
    }

    pub fn value(&self, x: &[T]) -> T {
        self.active_term(x).map_or(T::zero(), |i| self.terms[i].expr.value(x))
    }

    pub fn value_grad(&self, x: &[T]) -> (T, Vec<T>) {
        match self.active_term(x) {
            Some(i) => self.terms[i].expr.value_grad(x),
            None => (T::zero(), vec![T::zero(); x.len()]),
        }
    }

    fn touching(&self, b: &Aabb<T>) -> Vec<usize> {
        self.index()
            .box_candidates(&b.cast())
            .into_iter()
            .map(|i| i as usize)
            .filter(|&i| self.terms[i].support.intersects(b))
            .collect()
    }

    /// Terms are bounded on `b` intersected with their support, capped by the cached bounds.
    pub fn bounds(&self, b: &Aabb<T>) -> Interval<T> {
        self.touching(b).into_iter().fold(Interval::point(T::zero()), |acc, i| {
            let t = &self.terms[i];
            let local = match t.support.intersection(b) {
                Some(c) => {
                    let r = t.expr.bounds(&c);
                    let (lo, hi) = (r.lo.max(t.value_bound.lo), r.hi.min(t.value_bound.hi));
                    if lo <= hi {
                        Interval::new(lo, hi)
                    } else {
                        t.value_bound
                    }
                }
                None => t.value_bound,
            };
            acc.hull(&local)
        })
    }

    pub fn grad_bound(&self, b: &Aabb<T>) -> T {
        self.touching(b)
            .into_iter()
            .map(|i| {
                let t = &self.terms[i];
                t.support
                    .intersection(b)
                    .map_or(t.grad_bound, |c| t.expr.grad_bound(&c).min(t.grad_bound))
            })
            .fold(T::zero(), T::max)
    }

    pub fn sup_bound(&self) -> T {
        self.terms.iter().map(|t| t.value_bound.mag()).fold(T::zero(), T::max)
    }

    pub fn grad_sup_bound(&self) -> T {
        self.terms.iter().map(|t| t.grad_bound).fold(T::zero(), T::max)
    }

    pub fn feature_scale(&self) -> T {
        self.terms.iter().map(|t| t.expr.feature_scale()).fold(T::infinity(), T::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Bump, Expr};

    fn bump_term(lo: f64, hi: f64) -> DisjointTerm<f64> {
        let outer = Aabb::cube(2, lo, hi);
        let inner = outer.inflate_uniform(-(hi - lo) / 4.0);
        DisjointTerm::new(outer.clone(), Expr::bump(Bump::new(outer, inner).unwrap()))
    }

    #[test]
    fn lookup_and_bounds() {
        let s = DisjointSum::new(2, vec![bump_term(0.0, 1.0), bump_term(2.0, 3.0)]).unwrap();
        assert_eq!(s.value(&[0.5, 0.5]), 1.0);
        assert_eq!(s.value(&[2.5, 2.5]), 1.0);
        assert_eq!(s.value(&[1.5, 1.5]), 0.0);
        assert_eq!(s.value(&[9.0, 9.0]), 0.0);
        assert_eq!(s.active_term(&[2.5, 2.5]), Some(1));
        assert!(s.grad_bound(&Aabb::cube(2, 1.1, 1.9)) == 0.0);
        assert!(s.grad_bound(&Aabb::cube(2, 0.0, 3.0)) > 0.0);
        assert!(DisjointSum::new(2, vec![bump_term(0.0, 1.0), bump_term(0.5, 3.0)]).is_err());
    }

    #[test]
    fn serde_roundtrip_rebuilds_index() {
        let s = DisjointSum::new(2, vec![bump_term(0.0, 1.0), bump_term(2.0, 3.0)]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: DisjointSum<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.value(&[2.5, 2.5]), 1.0);
    }
}
