use serde::{Deserialize, Serialize};

use super::carrier::{Carrier, GraphCarrier, IfsCarrier};
use super::MeasureError;
use crate::geometry::{Aabb, Subspace};
use crate::scalar::Real;

/// Upper bound on the number of atoms one sampling call may produce.
pub const MAX_ATOMS: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Piece<T> {
    pub carrier: Carrier<T>,
    pub weight: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelMeasure<T> {
    pub omega: Aabb<T>,
    pub pieces: Vec<Piece<T>>,
}

impl<T: Real> ModelMeasure<T> {
    pub fn new(omega: Aabb<T>, pieces: Vec<Piece<T>>) -> Result<Self, MeasureError> {
        if !omega.is_valid() || (0..omega.dim()).any(|k| omega.extent(k) <= T::zero()) {
            return Err(MeasureError::Malformed("omega must be a nondegenerate box".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.weight > T::zero() && p.weight.is_finite()) {
                return Err(MeasureError::Malformed(format!("piece {i} has weight {}", p.weight)));
            }
        }
        Ok(Self { omega, pieces })
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn total_mass(&self) -> T {
        self.pieces.iter().fold(T::zero(), |acc, p| acc + p.weight)
    }
}

/// Weighted atoms standing in for a finite measure.
///
/// `piece[i]` names the owning piece and `local[i]` the atom's index inside it
/// (for IFS pieces, its base-`m` cell address). `id[i]` survives refinement.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AtomCloud<T> {
    pub dim: usize,
    pub points: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub piece: Vec<usize>,
    pub local: Vec<usize>,
    pub id: Vec<usize>,
    /// Sampling generation per piece (0 for non-IFS pieces).
    pub generation: Vec<usize>,
}

impl<T: Real> AtomCloud<T> {
    pub fn from_points(points: Vec<Vec<T>>, weights: Vec<T>) -> Self {
        let n = points.len();
        Self {
            dim: points.first().map_or(0, Vec::len),
            points,
            weights,
            piece: vec![0; n],
            local: (0..n).collect(),
            id: (0..n).collect(),
            generation: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, &w| acc + w)
    }

    pub fn mass_of(&self, indices: &[usize]) -> T {
        indices.iter().fold(T::zero(), |acc, &i| acc + self.weights[i])
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dim: self.dim,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
            piece: indices.iter().map(|&i| self.piece[i]).collect(),
            local: indices.iter().map(|&i| self.local[i]).collect(),
            id: indices.iter().map(|&i| self.id[i]).collect(),
            generation: self.generation.clone(),
        }
    }

    pub fn bbox(&self) -> Option<Aabb<T>> {
        Aabb::hull(self.points.iter().map(Vec::as_slice))
    }

    /// Bundle of atom `i` read from its owning piece.
    pub fn bundle(&self, m: &ModelMeasure<T>, i: usize) -> Subspace<T> {
        match &m.pieces[self.piece[i]].carrier {
            Carrier::Graph(g) => g.tangent(&self.points[i]),
            Carrier::Ifs(_) => Subspace::zero(self.dim),
            Carrier::Discrete(c) => c.bundles[self.local[i]].clone(),
        }
    }
}

fn graph_atoms<T: Real>(g: &GraphCarrier<T>, weight: T, res: usize) -> Result<(Vec<Vec<T>>, Vec<T>), MeasureError> {
    let d = g.domain.dim();
    let count = (res as f64).powi(d as i32 - 1);
    if count > MAX_ATOMS as f64 {
        return Err(MeasureError::TooManyAtoms {
            requested: count.min(usize::MAX as f64) as usize,
            limit: MAX_ATOMS,
        });
    }
    // midpoints of the domain cells; the height axis is degenerate and stays at zero
    let mut base = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; d];
    'outer: loop {
        let p: Vec<T> = (0..d)
            .map(|k| {
                if k == g.height_axis {
                    T::zero()
                } else {
                    let s = (T::lit(idx[k] as f64) + T::lit(0.5)) / T::lit(res as f64);
                    g.domain.lo[k] + s * g.domain.extent(k)
                }
            })
            .collect();
        base.push(p);
        let mut k = 0;
        loop {
            if k == d {
                break 'outer;
            }
            if k != g.height_axis {
                idx[k] += 1;
                if idx[k] < res {
                    break;
                }
                idx[k] = 0;
            }
            k += 1;
        }
    }
    let points: Vec<Vec<T>> = base.iter().map(|p| g.lift(p)).collect();
    let density: Vec<T> = points
        .iter()
        .map(|x| {
            let gr = g.profile.grad(x);
            let s = gr
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != g.height_axis)
                .fold(T::one(), |acc, (_, &v)| acc + v * v);
            s.sqrt()
        })
        .collect();
    let total = density.iter().fold(T::zero(), |acc, &v| acc + v);
    let weights = density.iter().map(|&v| weight * v / total).collect();
    Ok((points, weights))
}

fn ifs_atoms<T: Real>(f: &IfsCarrier<T>, weight: T, n: usize) -> Result<(Vec<Vec<T>>, Vec<T>), MeasureError> {
    let count = (f.maps.len() as f64).powi(n as i32);
    if count > MAX_ATOMS as f64 {
        return Err(MeasureError::TooManyAtoms {
            requested: count.min(usize::MAX as f64) as usize,
            limit: MAX_ATOMS,
        });
    }
    let w = weight / T::lit(count);
    let points = f.cells(n).iter().map(|c| f.cell_box(c).center()).collect::<Vec<_>>();
    let weights = vec![w; points.len()];
    Ok((points, weights))
}

/// Discretizes `m`: graphs by midpoint quadrature with `resolution` cells per free axis,
/// IFS pieces at generation `min(resolution, sample_generation)`.
pub fn sample_atoms<T: Real>(m: &ModelMeasure<T>, resolution: usize) -> Result<AtomCloud<T>, MeasureError> {
    if resolution == 0 {
        return Err(MeasureError::Malformed("resolution must be at least 1".into()));
    }
    let mut cloud = AtomCloud {
        dim: m.dim(),
        ..AtomCloud::default()
    };
    for (pi, p) in m.pieces.iter().enumerate() {
        let (pts, ws, generation) = match &p.carrier {
            Carrier::Graph(g) => {
                let (a, b) = graph_atoms(g, p.weight, resolution)?;
                (a, b, 0)
            }
            Carrier::Ifs(f) => {
                let n = resolution.min(f.sample_generation);
                let (a, b) = ifs_atoms(f, p.weight, n)?;
                (a, b, n)
            }
            Carrier::Discrete(c) => {
                let total = c.weights.iter().fold(T::zero(), |acc, &w| acc + w);
                (c.points.clone(), c.weights.iter().map(|&w| p.weight * w / total).collect(), 0)
            }
        };
        if cloud.len() + pts.len() > MAX_ATOMS {
            return Err(MeasureError::TooManyAtoms {
                requested: cloud.len() + pts.len(),
                limit: MAX_ATOMS,
            });
        }
        for (j, (x, w)) in pts.into_iter().zip(ws).enumerate() {
            if !m.omega.contains_strictly(&x) {
                return Err(MeasureError::Malformed(format!("piece {pi} atom {x:?} outside omega")));
            }
            cloud.id.push(cloud.points.len());
            cloud.points.push(x);
            cloud.weights.push(w);
            cloud.piece.push(pi);
            cloud.local.push(j);
        }
        cloud.generation.push(generation);
    }
    Ok(cloud)
}

/// Bundle of the piece containing `x`; graph membership is tested to `1e-12`.
pub fn bundle_at<T: Real>(m: &ModelMeasure<T>, x: &[T]) -> Result<Subspace<T>, MeasureError> {
    let tol = T::lit(1e-12);
    for p in &m.pieces {
        match &p.carrier {
            Carrier::Graph(g) if g.contains(x, tol) => return Ok(g.tangent(x)),
            Carrier::Ifs(f) if f.base_box.inflate_uniform(tol).contains(x) => return Ok(Subspace::zero(x.len())),
            Carrier::Discrete(c) => {
                if let Some(i) = c.points.iter().position(|q| q.iter().zip(x).all(|(a, b)| (*a - *b).abs() <= tol)) {
                    return Ok(c.bundles[i].clone());
                }
            }
            _ => {}
        }
    }
    Err(MeasureError::NotOnCarrier(format!("{x:?}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Refinement<T> {
    pub kept: AtomCloud<T>,
    pub dropped_ids: Vec<usize>,
    pub dropped_mass: T,
}

/// Drops the atoms flagged by `predicate`; fails if their mass reaches `budget`.
pub fn inner_regular_refine<T: Real>(
    cloud: &AtomCloud<T>,
    budget: T,
    name: &str,
    predicate: impl Fn(usize) -> bool,
) -> Result<Refinement<T>, MeasureError> {
    let mut flagged: Vec<usize> = (0..cloud.len()).filter(|&i| predicate(i)).collect();
    // smallest weights first so that partial sums are accurate
    flagged.sort_by(|&a, &b| cloud.weights[a].partial_cmp(&cloud.weights[b]).unwrap().then(a.cmp(&b)));
    let dropped_mass = cloud.mass_of(&flagged);
    if !flagged.is_empty() && dropped_mass >= budget {
        return Err(MeasureError::BudgetExceeded {
            predicate: name.to_string(),
            needed: dropped_mass.to_f64_lossy(),
            budget: budget.to_f64_lossy(),
        });
    }
    let mut mark = vec![false; cloud.len()];
    for &i in &flagged {
        mark[i] = true;
    }
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| !mark[i]).collect();
    let mut dropped_ids: Vec<usize> = flagged.iter().map(|&i| cloud.id[i]).collect();
    dropped_ids.sort_unstable();
    Ok(Refinement {
        kept: cloud.subset(&keep),
        dropped_ids,
        dropped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;
    use crate::measures::carrier::Similarity;

    fn omega() -> Aabb<f64> {
        Aabb::cube(2, -1.0, 2.0)
    }

    fn segment() -> Piece<f64> {
        let g = GraphCarrier::new(1, parse_expr("0", 2).unwrap(), Aabb::new(vec![0.0, 0.0], vec![1.0, 0.0]), &omega()).unwrap();
        Piece {
            carrier: Carrier::Graph(g),
            weight: 1.0,
        }
    }

    fn cantor(weight: f64) -> Piece<f64> {
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
            5,
            200,
            &omega(),
        )
        .unwrap();
        Piece {
            carrier: Carrier::Ifs(f),
            weight,
        }
    }

    #[test]
    fn segment_quadrature() {
        let m = ModelMeasure::new(omega(), vec![segment()]).unwrap();
        let c = sample_atoms(&m, 100).unwrap();
        assert_eq!(c.len(), 100);
        assert!(c.weights.iter().all(|&w| (w - 0.01).abs() < 1e-15));
        assert!(c.points.iter().all(|p| p[1] == 0.0 && p[0] > 0.0 && p[0] < 1.0));
        let b = bundle_at(&m, &c.points[10]).unwrap();
        assert_eq!(b.dim(), 1);
        assert!((b.basis()[0][0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cantor_generation_five() {
        let m = ModelMeasure::new(omega(), vec![cantor(1.0)]).unwrap();
        let c = sample_atoms(&m, 50).unwrap();
        assert_eq!(c.len(), 32);
        assert!(c.weights.iter().all(|&w| (w - 1.0 / 32.0).abs() < 1e-15));
        assert!((c.points[0][0] - 0.5 / 243.0).abs() < 1e-15);
        assert_eq!(bundle_at(&m, &c.points[3]).unwrap().dim(), 0);
        assert_eq!(c.bundle(&m, 3).dim(), 0);
    }

    #[test]
    fn union_masses() {
        let mut seg = segment();
        seg.weight = 0.3;
        let m = ModelMeasure::new(omega(), vec![seg, cantor(0.7)]).unwrap();
        let c = sample_atoms(&m, 64).unwrap();
        let per = |p| (0..c.len()).filter(|&i| c.piece[i] == p).map(|i| c.weights[i]).sum::<f64>();
        assert!((per(0) - 0.3).abs() < 1e-12);
        assert!((per(1) - 0.7).abs() < 1e-12);
        assert!((c.total_mass() - m.total_mass()).abs() < 1e-9);
    }

    #[test]
    fn sine_bundle() {
        let g = GraphCarrier::new(
            1,
            parse_expr("0.5*sin(x1)", 2).unwrap(),
            Aabb::new(vec![-0.5, 0.0], vec![0.5, 0.0]),
            &omega(),
        )
        .unwrap();
        let m = ModelMeasure::new(
            omega(),
            vec![Piece {
                carrier: Carrier::Graph(g),
                weight: 1.0,
            }],
        )
        .unwrap();
        let b = bundle_at(&m, &[0.0, 0.0]).unwrap();
        let v = &b.basis()[0];
        let n = (1.25f64).sqrt();
        assert!((v[0].abs() - 1.0 / n).abs() < 1e-14 && (v[1].abs() - 0.5 / n).abs() < 1e-14);
        let h = 1e-6f64;
        let fd = (0.5 * h.sin() - 0.5 * (-h).sin()) / (2.0 * h);
        assert!((v[1] / v[0] - fd).abs() < 1e-9);
        assert!(bundle_at(&m, &[0.0, 0.3]).is_err());
    }

    #[test]
    fn refinement_budget() {
        let pts: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0, 0.0]).collect();
        let c = AtomCloud::from_points(pts, vec![0.01; 100]);
        let same = inner_regular_refine(&c, 1e-3, "none", |_| false).unwrap();
        assert_eq!(same.kept, c);
        let r = inner_regular_refine(&c, 0.05, "marked", |i| i % 40 == 7).unwrap();
        assert_eq!(r.kept.len(), 97);
        assert!((r.dropped_mass - 0.03).abs() < 1e-15);
        assert!((r.kept.total_mass() + r.dropped_mass - 1.0).abs() < 1e-12);
        match inner_regular_refine(&c, 0.01, "marked", |i| i % 40 == 7) {
            Err(MeasureError::BudgetExceeded { predicate, .. }) => assert_eq!(predicate, "marked"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn memory_limit() {
        let m = ModelMeasure::new(omega(), vec![segment()]).unwrap();
        assert!(matches!(sample_atoms(&m, MAX_ATOMS + 1), Err(MeasureError::TooManyAtoms { .. })));
    }
}
