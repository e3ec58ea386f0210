//! Finite geodesic nets `v_1, ..., v_N` of radius `(pi/2 - alpha)/2` on `S^{d-1}`.
//!
//! For every proper subspace `L` some `C(v_j, alpha)` meets `L` only at the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cone, Direction, GeometryError, Subspace};
use crate::scalar::{dot, Real};

const MAX_REFINEMENTS: usize = 8;
const CERTIFY_SAMPLES: usize = 40_000;
const CERTIFY_SEED: u64 = 0x6e65_7400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DirectionNet<T> {
    pub half_angle: T,
    pub directions: Vec<Direction<T>>,
    pub geodesic_radius: T,
}

impl<T: Real> DirectionNet<T> {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, Direction::dim)
    }

    pub fn cone(&self, j: usize) -> Cone<T> {
        Cone {
            axis: self.directions[j].clone(),
            half_angle: self.half_angle,
        }
    }

    /// First index whose cone is transverse to `l`.
    pub fn first_transverse(&self, l: &Subspace<T>) -> Option<usize> {
        (0..self.len()).find(|&j| l.transverse_to(&self.cone(j)))
    }

    /// Largest geodesic distance from `n` to the net, as a cosine.
    fn best_cos(&self, n: &[f64]) -> f64 {
        self.directions
            .iter()
            .map(|v| v.as_slice().iter().zip(n).map(|(a, b)| a.to_f64_lossy() * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetWitness {
    /// `"subspace"` or `"covering"`.
    pub kind: String,
    pub subspace_dim: usize,
    pub basis: Vec<Vec<f64>>,
    /// Smallest `|P_L v_j| - cos(alpha)` or `cos(r) - max_j n.v_j` over the net.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub dimension: usize,
    pub directions: usize,
    pub trials_per_dim: usize,
    pub subspace_failures: usize,
    pub covering_failures: usize,
    pub worst_subspace_margin: f64,
    pub worst_covering_margin: f64,
    pub witnesses: Vec<NetWitness>,
    pub pass: bool,
}

pub(crate) fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn cast_unit<T: Real>(v: &[f64]) -> Direction<T> {
    let w: Vec<T> = v.iter().map(|&x| T::lit(x)).collect();
    Direction::normalize(&w).expect("unit candidate")
}

fn signed_axes(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * d);
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = s;
            out.push(e);
        }
    }
    out
}

fn circle_net(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            if (4 * j) % count == 0 {
                match 4 * j / count {
                    0 => vec![0.0, 1.0],
                    1 => vec![-1.0, 0.0],
                    2 => vec![0.0, -1.0],
                    _ => vec![1.0, 0.0],
                }
            } else {
                let th = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                vec![th.cos(), th.sin()]
            }
        })
        .collect()
}

fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut out = signed_axes(3);
    for i in 0..count {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        out.push(vec![r * phi.cos(), r * phi.sin(), z]);
    }
    out
}

fn greedy_packing(d: usize, target: f64, pool_size: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Vec<f64>> = (0..pool_size).map(|_| random_unit(&mut rng, d)).collect();
    let mut chosen = signed_axes(d);
    let mut best: Vec<f64> = pool
        .par_iter()
        .map(|p| chosen.iter().map(|c| dot(p, c)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let cos_target = target.cos();
    loop {
        let (idx, worst) = best
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &b)| if b < acc.1 { (i, b) } else { acc });
        if worst >= cos_target {
            return chosen;
        }
        let c = pool[idx].clone();
        best.par_iter_mut().zip(pool.par_iter()).for_each(|(b, p)| {
            *b = b.max(dot(p, &c));
        });
        chosen.push(c);
    }
}

fn covers(net: &DirectionNet<f64>, d: usize, radius: f64, samples: usize, seed: u64) -> bool {
    let cos_r = radius.cos();
    let normals: Vec<Vec<f64>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| random_unit(&mut rng, d)).collect()
    };
    normals.par_iter().all(|n| net.best_cos(n) >= cos_r)
}

/// Builds a net of geodesic radius `(pi/2 - alpha)/2` and certifies it by sampling.
///
/// `d = 2` uses equally spaced angles starting at `pi/2`; `d = 3` a spiral seeded with
/// the signed axes; `d >= 4` greedy farthest-point packing over a random pool.
pub fn build_direction_net<T: Real>(d: usize, alpha: T) -> Result<DirectionNet<T>, GeometryError> {
    if d < 2 {
        return Err(GeometryError::BadDimension(d));
    }
    super::c_alpha(alpha)?;
    let a = alpha.to_f64_lossy();
    let radius = 0.5 * (std::f64::consts::FRAC_PI_2 - a);
    let wrap = |dirs: Vec<Vec<f64>>| DirectionNet {
        half_angle: a,
        directions: dirs.iter().map(|v| cast_unit::<f64>(v)).collect(),
        geodesic_radius: radius,
    };
    let spacing = std::f64::consts::FRAC_PI_2 - a;
    let mut attempt = 0;
    let mut scale = 1usize;
    while attempt <= MAX_REFINEMENTS {
        let candidate = match d {
            2 => {
                let mut n = (2.0 * std::f64::consts::PI / spacing - 1e-9).ceil() as usize;
                n = n.max(4).div_ceil(4) * 4;
                while 2.0 * std::f64::consts::PI / n as f64 > spacing * (1.0 + 1e-12) {
                    n += 4;
                }
                wrap(circle_net(n * scale))
            }
            3 => {
                let base = (4.0 / (1.0 - (0.8 * radius).cos())).ceil() as usize;
                wrap(fibonacci_sphere(base * scale))
            }
            _ => {
                let est = 2.0 / (1.0 - (0.8 * radius).cos()).powf((d as f64 - 1.0) / 2.0);
                let pool = ((20.0 * est) as usize).clamp(20_000, 400_000) * scale;
                wrap(greedy_packing(d, 0.8 * radius, pool, CERTIFY_SEED + attempt as u64))
            }
        };
        // the planar net is exact by construction; sampled nets keep a 10% safety margin
        let certify_radius = if d == 2 { radius * (1.0 + 1e-12) } else { 0.9 * radius };
        if covers(&candidate, d, certify_radius, CERTIFY_SAMPLES, CERTIFY_SEED) {
            return Ok(DirectionNet {
                half_angle: alpha,
                directions: candidate
                    .directions
                    .iter()
                    .map(|v| {
                        let w: Vec<T> = v.as_slice().iter().map(|&c| T::lit(c)).collect();
                        // exact axes stay exact after the cast
                        Direction::normalize(&w).expect("unit")
                    })
                    .collect(),
                geodesic_radius: T::lit(radius),
            });
        }
        attempt += 1;
        scale *= 2;
    }
    Err(GeometryError::NetNotCertified {
        d,
        alpha: a,
        attempts: MAX_REFINEMENTS,
    })
}

fn random_subspace<R: Rng>(rng: &mut R, d: usize, k: usize) -> Subspace<f64> {
    loop {
        let frame: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(rng, d)).collect();
        let l = Subspace::span(d, &frame);
        if l.dim() == k {
            return l;
        }
    }
}

/// Samples `trials` random subspaces of every dimension `1..d-1` and `trials` unit
/// normals; each subspace must be transverse to some net cone and each normal must
/// lie within the geodesic radius of some net direction.
pub fn verify_net<T: Real>(net: &DirectionNet<T>, d: usize, trials: usize, seed: u64) -> NetReport {
    let f: DirectionNet<f64> = DirectionNet {
        half_angle: net.half_angle.to_f64_lossy(),
        directions: net
            .directions
            .iter()
            .map(|v| Direction::normalize(&v.as_slice().iter().map(|c| c.to_f64_lossy()).collect::<Vec<_>>()).expect("unit"))
            .collect(),
        geodesic_radius: net.geodesic_radius.to_f64_lossy(),
    };
    let cos_a = f.half_angle.cos();
    let mut witnesses = Vec::new();
    let mut subspace_failures = 0;
    let mut worst_subspace_margin = f64::NEG_INFINITY;
    for k in 1..d {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let subspaces: Vec<Subspace<f64>> = (0..trials).map(|_| random_subspace(&mut rng, d, k)).collect();
        let margins: Vec<f64> = subspaces
            .par_iter()
            .map(|l| {
                f.directions
                    .iter()
                    .map(|v| crate::scalar::norm(&l.project(v.as_slice())) - cos_a)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for (l, &m) in subspaces.iter().zip(&margins) {
            worst_subspace_margin = worst_subspace_margin.max(m);
            if m >= 0.0 {
                subspace_failures += 1;
                if witnesses.len() < 16 {
                    witnesses.push(NetWitness {
                        kind: "subspace".into(),
                        subspace_dim: k,
                        basis: l.basis().to_vec(),
                        margin: m,
                    });
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let normals: Vec<Vec<f64>> = (0..trials).map(|_| random_unit(&mut rng, d)).collect();
    let cos_r = f.geodesic_radius.cos();
    let gaps: Vec<f64> = normals.par_iter().map(|n| cos_r - f.best_cos(n)).collect();
    let mut covering_failures = 0;
    let mut worst_covering_margin = f64::NEG_INFINITY;
    for (n, &g) in normals.iter().zip(&gaps) {
        worst_covering_margin = worst_covering_margin.max(g);
        if g > 0.0 {
            covering_failures += 1;
            if witnesses.len() < 32 {
                witnesses.push(NetWitness {
                    kind: "covering".into(),
                    subspace_dim: 0,
                    basis: vec![n.clone()],
                    margin: g,
                });
            }
        }
    }
    NetReport {
        dimension: d,
        directions: f.len(),
        trials_per_dim: trials,
        subspace_failures,
        covering_failures,
        worst_subspace_margin,
        worst_covering_margin,
        witnesses,
        pass: subspace_failures == 0 && covering_failures == 0 && !f.is_empty(),
    }
}
