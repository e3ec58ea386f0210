use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Closed axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Aabb<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners must have equal dimension");
        Self { lo, hi }
    }

    pub fn cube(d: usize, lo: T, hi: T) -> Self {
        Self::new(vec![lo; d], vec![hi; d])
    }

    /// Smallest box containing every point yielded by `points`.
    pub fn hull<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Self::new(first.to_vec(), first.to_vec());
        for p in it {
            for k in 0..p.len() {
                b.lo[k] = b.lo[k].min(p[k]);
                b.hi[k] = b.hi[k].max(p[k]);
            }
        }
        Some(b)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_valid(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| l.is_finite() && h.is_finite() && l <= h)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        (0..self.dim()).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    pub fn contains_strictly(&self, x: &[T]) -> bool {
        (0..self.dim()).all(|k| x[k] > self.lo[k] && x[k] < self.hi[k])
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] && other.hi[k] <= self.hi[k])
    }

    pub fn intersects(&self, other: &Self) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    pub fn inflate(&self, by: &[T]) -> Self {
        Self::new(
            self.lo.iter().zip(by).map(|(&l, &b)| l - b).collect(),
            self.hi.iter().zip(by).map(|(&h, &b)| h + b).collect(),
        )
    }

    pub fn inflate_uniform(&self, by: T) -> Self {
        self.inflate(&vec![by; self.dim()])
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let b = Self::new(
            self.lo.iter().zip(&other.lo).map(|(&a, &b)| a.max(b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(&a, &b)| a.min(b)).collect(),
        );
        b.is_valid().then_some(b)
    }

    pub fn extent(&self, k: usize) -> T {
        self.hi[k] - self.lo[k]
    }

    pub fn diameter(&self) -> T {
        (0..self.dim())
            .fold(T::zero(), |acc, k| acc + self.extent(k) * self.extent(k))
            .sqrt()
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l + h) * half).collect()
    }

    /// Separation along the best axis (L-infinity gap); zero when the boxes meet.
    pub fn linf_gap(&self, other: &Self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, k| {
            let g = (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]);
            acc.max(g)
        })
    }

    /// Per-axis distance from `inner` to the boundary of `self` (minimum of both sides).
    pub fn clearance(&self, inner: &Self) -> Vec<T> {
        (0..self.dim())
            .map(|k| (inner.lo[k] - self.lo[k]).min(self.hi[k] - inner.hi[k]))
            .collect()
    }

    /// Euclidean distance from `x` to the box boundary when `x` is inside.
    pub fn depth(&self, x: &[T]) -> T {
        (0..self.dim()).fold(T::infinity(), |acc, k| acc.min(x[k] - self.lo[k]).min(self.hi[k] - x[k]))
    }

    pub fn corners(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect())
            .collect()
    }

    /// Regular grid with `n` points per axis (cell midpoints when `midpoints`).
    pub fn grid(&self, n: usize, midpoints: bool) -> Vec<Vec<T>> {
        let d = self.dim();
        let n = n.max(1);
        let mut out = Vec::with_capacity(n.pow(d as u32));
        let mut idx = vec![0usize; d];
        loop {
            let p = (0..d)
                .map(|k| {
                    let frac = if midpoints {
                        (T::lit(idx[k] as f64) + T::lit(0.5)) / T::lit(n as f64)
                    } else if n == 1 {
                        T::lit(0.5)
                    } else {
                        T::lit(idx[k] as f64) / T::lit((n - 1) as f64)
                    };
                    self.lo[k] + frac * self.extent(k)
                })
                .collect();
            out.push(p);
            let mut k = 0;
            loop {
                if k == d {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Aabb<U> {
        Aabb::new(
            self.lo.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            self.hi.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_and_containment() {
        let a = Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let b = Aabb::new(vec![1.5, 0.2], vec![2.0, 0.4]);
        assert_eq!(a.linf_gap(&b), 0.5);
        assert!(!a.intersects(&b));
        assert!(a.contains(&[1.0, 0.0]));
        assert!(!a.contains_strictly(&[1.0, 0.5]));
        assert_eq!(a.corners().len(), 4);
    }

    #[test]
    fn grid_counts() {
        let a = Aabb::<f64>::cube(2, -1.0, 1.0);
        let g = a.grid(5, false);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[24], vec![1.0, 1.0]);
    }
}
