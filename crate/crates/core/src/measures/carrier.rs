use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::fields::ExprRef;
use crate::geometry::{Aabb, Cone, Subspace};
use crate::scalar::Real;

/// Hypersurface graph `x_k = profile(x_perp)` over an axis-aligned domain.
///
/// `domain` is a full `d`-box whose `k`-th extent is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraphCarrier<T> {
    pub height_axis: usize,
    pub profile: ExprRef<T>,
    pub domain: Aabb<T>,
    /// Certified bound of `|grad profile|` over the ambient box.
    pub lip_profile: T,
}

impl<T: Real> GraphCarrier<T> {
    pub fn new(height_axis: usize, profile: ExprRef<T>, domain: Aabb<T>, omega: &Aabb<T>) -> Result<Self, MeasureError> {
        let d = omega.dim();
        if height_axis >= d || domain.dim() != d {
            return Err(MeasureError::Malformed(format!("graph axis {height_axis} in dimension {d}")));
        }
        if profile.depends_on(height_axis) {
            return Err(MeasureError::Malformed(format!(
                "graph profile depends on its own height coordinate x{}",
                height_axis + 1
            )));
        }
        let mut dom = domain;
        dom.lo[height_axis] = T::zero();
        dom.hi[height_axis] = T::zero();
        if !dom.is_valid() {
            return Err(MeasureError::Malformed("graph domain is not a valid box".into()));
        }
        let lip_profile = profile.grad_bound(omega);
        let g = Self {
            height_axis,
            profile,
            domain: dom,
            lip_profile,
        };
        // carrier must sit inside omega with positive clearance
        let mut hull = g.domain.clone();
        let range = g.profile.bounds(&g.domain);
        hull.lo[height_axis] = range.lo;
        hull.hi[height_axis] = range.hi;
        if !omega.contains_box(&hull) || omega.clearance(&hull).iter().any(|&c| c <= T::zero()) {
            return Err(MeasureError::Malformed("graph carrier touches the boundary of omega".into()));
        }
        Ok(g)
    }

    pub fn lift(&self, x_perp: &[T]) -> Vec<T> {
        let mut p = x_perp.to_vec();
        p[self.height_axis] = self.profile.value(&p);
        p
    }

    /// Tangent plane spanned by `e_j + d_j profile e_k`, `j != k`.
    pub fn tangent(&self, x: &[T]) -> Subspace<T> {
        let d = x.len();
        let k = self.height_axis;
        let g = self.profile.grad(x);
        let vectors: Vec<Vec<T>> = (0..d)
            .filter(|&j| j != k)
            .map(|j| {
                let mut v = vec![T::zero(); d];
                v[j] = T::one();
                v[k] = g[j];
                v
            })
            .collect();
        Subspace::span(d, &vectors)
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        let k = self.height_axis;
        (0..x.len()).all(|j| j == k || (x[j] >= self.domain.lo[j] && x[j] <= self.domain.hi[j]))
            && (x[k] - self.profile.value(x)).abs() <= tol
    }
}

/// Homothety `x -> ratio * x + translation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Similarity<T> {
    pub ratio: T,
    pub translation: Vec<T>,
}

impl<T: Real> Similarity<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.translation).map(|(&a, &b)| self.ratio * a + b).collect()
    }

    pub fn apply_box(&self, b: &Aabb<T>) -> Aabb<T> {
        Aabb::new(self.apply(&b.lo), self.apply(&b.hi))
    }
}

/// Attractor of finitely many homotheties with `sum r_i < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IfsCarrier<T> {
    pub maps: Vec<Similarity<T>>,
    pub base_box: Aabb<T>,
    /// Generation used when sampling atoms.
    pub sample_generation: usize,
    /// Deepest generation a width-function cover may use.
    pub generation_cap: usize,
}

impl<T: Real> IfsCarrier<T> {
    pub fn new(
        maps: Vec<Similarity<T>>,
        base_box: Aabb<T>,
        sample_generation: usize,
        generation_cap: usize,
        omega: &Aabb<T>,
    ) -> Result<Self, MeasureError> {
        let d = omega.dim();
        if maps.len() < 2 {
            return Err(MeasureError::Malformed("an IFS needs at least two maps".into()));
        }
        if base_box.dim() != d || !base_box.is_valid() {
            return Err(MeasureError::Malformed("IFS base box malformed".into()));
        }
        let slack = base_box.inflate_uniform(T::lit(1e-12) * (base_box.diameter() + T::one()));
        for (i, m) in maps.iter().enumerate() {
            if m.translation.len() != d || !(m.ratio > T::zero() && m.ratio < T::one()) {
                return Err(MeasureError::Malformed(format!(
                    "IFS map {i} needs ratio in (0,1) and a {d}-vector"
                )));
            }
            if !slack.contains_box(&m.apply_box(&base_box)) {
                return Err(MeasureError::Malformed(format!("IFS map {i} sends the base box outside itself")));
            }
        }
        let c = Self {
            maps,
            base_box,
            sample_generation,
            generation_cap,
        };
        if c.ratio_sum() >= T::one() {
            return Err(MeasureError::Malformed(format!(
                "ratio sum {} is not below 1 (thinness fails)",
                c.ratio_sum()
            )));
        }
        let images: Vec<Aabb<T>> = c.maps.iter().map(|m| m.apply_box(&c.base_box)).collect();
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                if images[i].intersects(&images[j]) {
                    return Err(MeasureError::Malformed(format!("open-set condition fails for maps {i} and {j}")));
                }
            }
        }
        if !omega.contains_box(&c.base_box) || omega.clearance(&c.base_box).iter().any(|&v| v <= T::zero()) {
            return Err(MeasureError::Malformed("IFS base box touches the boundary of omega".into()));
        }
        if sample_generation > generation_cap {
            return Err(MeasureError::Malformed("sample generation exceeds the generation cap".into()));
        }
        Ok(c)
    }

    pub fn ratio_sum(&self) -> T {
        self.maps.iter().fold(T::zero(), |acc, m| acc + m.ratio)
    }

    pub fn max_ratio(&self) -> T {
        self.maps.iter().fold(T::zero(), |acc, m| acc.max(m.ratio))
    }

    /// Length of the projection of the base box on `v`.
    pub fn base_projection(&self, v: &[T]) -> T {
        (0..v.len()).fold(T::zero(), |acc, k| acc + v[k].abs() * self.base_box.extent(k))
    }

    /// `(sum r_i)^n * len0`, the total projected length of the generation-`n` cover.
    pub fn cover_length(&self, v: &[T], n: usize) -> T {
        self.base_projection(v) * self.ratio_sum().powi(n as i32)
    }

    /// Cells of generation `n` in address order as `(scale, offset)` affine maps.
    pub fn cells(&self, n: usize) -> Vec<(T, Vec<T>)> {
        let d = self.base_box.dim();
        let mut level = vec![(T::one(), vec![T::zero(); d])];
        for _ in 0..n {
            let mut next = Vec::with_capacity(level.len() * self.maps.len());
            for (s, o) in &level {
                for m in &self.maps {
                    let off = (0..d).map(|k| *s * m.translation[k] + o[k]).collect();
                    next.push((*s * m.ratio, off));
                }
            }
            level = next;
        }
        level
    }

    pub fn cell_box(&self, cell: &(T, Vec<T>)) -> Aabb<T> {
        let (s, o) = cell;
        Aabb::new(
            self.base_box.lo.iter().zip(o).map(|(&l, &b)| *s * l + b).collect(),
            self.base_box.hi.iter().zip(o).map(|(&h, &b)| *s * h + b).collect(),
        )
    }

    /// Ratio product along the base-`m` address of a generation-`n` cell index.
    pub fn address_scale(&self, index: usize, n: usize) -> T {
        let m = self.maps.len();
        let mut idx = index;
        let mut s = T::one();
        for _ in 0..n {
            s = s * self.maps[idx % m].ratio;
            idx /= m;
        }
        s
    }

    /// Affine cell map of the ancestor at generation `g <= n` of cell `index`.
    pub fn ancestor(&self, index: usize, n: usize, g: usize) -> (T, Vec<T>) {
        let m = self.maps.len();
        let mut digits = Vec::with_capacity(n);
        let mut idx = index;
        for _ in 0..n {
            digits.push(idx % m);
            idx /= m;
        }
        digits.reverse();
        let d = self.base_box.dim();
        let mut s = T::one();
        let mut o = vec![T::zero(); d];
        for &i in digits.iter().take(g) {
            let map = &self.maps[i];
            for k in 0..d {
                o[k] = s * map.translation[k] + o[k];
            }
            s = s * map.ratio;
        }
        (s, o)
    }
}

/// Finite atom set with per-atom bundles (push-forwards of other carriers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DiscreteCarrier<T> {
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub bundles: Vec<Subspace<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum Carrier<T> {
    Graph(GraphCarrier<T>),
    Ifs(IfsCarrier<T>),
    Discrete(DiscreteCarrier<T>),
}

/// Data a width-function construction needs for one carrier and one cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum Certificate<T> {
    Graph {
        height_axis: usize,
        sign: T,
        profile: ExprRef<T>,
        lip_profile: T,
        cot_alpha: T,
    },
    Ifs {
        carrier: IfsCarrier<T>,
        axis: Vec<T>,
        initial_length: T,
        ratio_sum: T,
    },
    Discrete {
        axis: Vec<T>,
    },
}

const TANGENT_SAMPLES: usize = 64;

/// Certifies that `carrier` is null for the cone `c`, or names the violated condition.
pub fn cone_null_certificate<T: Real>(carrier: &Carrier<T>, c: &Cone<T>) -> Result<Certificate<T>, MeasureError> {
    match carrier {
        Carrier::Graph(g) => {
            let Some((k, sign)) = c.axis.coordinate_axis() else {
                return Err(MeasureError::Rejected(
                    "graph certificates need a cone along a coordinate axis".into(),
                ));
            };
            if k != g.height_axis {
                return Err(MeasureError::Rejected(format!(
                    "cone axis e{} differs from graph height axis e{}",
                    k + 1,
                    g.height_axis + 1
                )));
            }
            let cot = c.cot();
            if g.lip_profile > cot {
                return Err(MeasureError::Rejected(format!(
                    "lip_profile {} > 1/tan(alpha) = {}",
                    g.lip_profile, cot
                )));
            }
            let d = g.domain.dim();
            let per_axis = ((TANGENT_SAMPLES as f64).powf(1.0 / (d - 1).max(1) as f64).ceil() as usize).max(2);
            for p in g.domain.grid(per_axis, false) {
                let x = g.lift(&p);
                if !g.tangent(&x).transverse_to(c) {
                    return Err(MeasureError::Rejected(format!("tangent plane at {x:?} meets the cone")));
                }
            }
            Ok(Certificate::Graph {
                height_axis: k,
                sign,
                profile: g.profile.clone(),
                lip_profile: g.lip_profile,
                cot_alpha: cot,
            })
        }
        Carrier::Ifs(f) => {
            let sum = f.ratio_sum();
            if sum >= T::one() {
                return Err(MeasureError::Rejected(format!("ratio sum {sum} >= 1")));
            }
            let axis = c.axis.as_slice().to_vec();
            Ok(Certificate::Ifs {
                initial_length: f.base_projection(&axis),
                carrier: f.clone(),
                axis,
                ratio_sum: sum,
            })
        }
        Carrier::Discrete(_) => Ok(Certificate::Discrete {
            axis: c.axis.as_slice().to_vec(),
        }),
    }
}
