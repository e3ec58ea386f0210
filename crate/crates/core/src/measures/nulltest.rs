use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::carrier::{Carrier, IfsCarrier};
use crate::geometry::{Aabb, Cone};
use crate::scalar::Real;

const SEGMENTS: usize = 8;
const SAMPLES_PER_CURVE: usize = 20_000;
const LEVELS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullTestReport {
    pub thickening: Vec<f64>,
    /// Largest intersection length over the trials, per thickening level.
    pub estimates: Vec<f64>,
    pub trials: usize,
    pub red_flag: bool,
}

fn in_ifs(f: &IfsCarrier<f64>, x: &[f64], generation: usize, thick: f64) -> bool {
    fn rec(f: &IfsCarrier<f64>, b: &Aabb<f64>, x: &[f64], left: usize, thick: f64) -> bool {
        if !b.inflate_uniform(thick).contains(x) {
            return false;
        }
        if left == 0 {
            return true;
        }
        f.maps.iter().any(|m| rec(f, &m.apply_box(b), x, left - 1, thick))
    }
    rec(f, &f.base_box, x, generation, thick)
}

fn cone_direction(rng: &mut ChaCha8Rng, axis: &[f64], alpha: f64) -> Vec<f64> {
    let d = axis.len();
    let mut p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a: f64 = p.iter().zip(axis).map(|(u, v)| u * v).sum();
    for k in 0..d {
        p[k] -= a * axis[k];
    }
    let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let theta = alpha * rng.gen::<f64>();
    if n < 1e-12 {
        return axis.to_vec();
    }
    (0..d).map(|k| theta.cos() * axis[k] + theta.sin() * p[k] / n).collect()
}

/// Monte-Carlo estimate of the length of cone-directed polygonal curves inside
/// thickenings of `carrier`; the estimates should decay with the thickening.
pub fn empirical_cone_null_test<T: Real>(carrier: &Carrier<T>, cone: &Cone<T>, trials: usize, seed: u64) -> NullTestReport {
    let axis: Vec<f64> = cone.axis.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let alpha = cone.half_angle.to_f64_lossy();
    let d = axis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // (diameter, anchor sampler, membership) per carrier class
    let (diam, levels): (f64, Vec<f64>) = match carrier {
        Carrier::Graph(g) => {
            let b: Aabb<f64> = g.domain.cast();
            let diam = b.diameter().max(1e-3);
            (diam, (0..LEVELS).map(|l| diam * 0.1 * 0.25f64.powi(l as i32)).collect())
        }
        Carrier::Ifs(f) => {
            let b: Aabb<f64> = f.base_box.cast();
            (b.diameter(), (0..LEVELS).map(|l| (2 * l + 2) as f64).collect())
        }
        Carrier::Discrete(c) => {
            let pts: Vec<Vec<f64>> = c.points.iter().map(|p| p.iter().map(|v| v.to_f64_lossy()).collect()).collect();
            let b = Aabb::hull(pts.iter().map(Vec::as_slice)).unwrap_or_else(|| Aabb::cube(d, 0.0, 0.0));
            let diam = b.diameter().max(1e-3);
            (diam, (0..LEVELS).map(|l| diam * 0.1 * 0.25f64.powi(l as i32)).collect())
        }
    };
    let inside = |x: &[f64], level: usize| -> bool {
        match carrier {
            Carrier::Graph(g) => {
                let k = g.height_axis;
                let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
                (0..d).all(|j| j == k || (xt[j] >= g.domain.lo[j] && xt[j] <= g.domain.hi[j]))
                    && (x[k] - g.profile.value(&xt).to_f64_lossy()).abs() <= levels[level]
            }
            Carrier::Ifs(f) => {
                let f64c = IfsCarrier {
                    maps: f
                        .maps
                        .iter()
                        .map(|m| super::Similarity {
                            ratio: m.ratio.to_f64_lossy(),
                            translation: m.translation.iter().map(|v| v.to_f64_lossy()).collect(),
                        })
                        .collect(),
                    base_box: f.base_box.cast(),
                    sample_generation: f.sample_generation,
                    generation_cap: f.generation_cap,
                };
                let n = levels[level] as usize;
                let cell = f64c.max_ratio().powi(n as i32) * diam;
                in_ifs(&f64c, x, n, 0.5 * cell)
            }
            Carrier::Discrete(c) => c
                .points
                .iter()
                .any(|p| p.iter().zip(x).map(|(a, b)| (a.to_f64_lossy() - b).powi(2)).sum::<f64>().sqrt() <= levels[level]),
        }
    };
    let anchor = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        match carrier {
            Carrier::Graph(g) => {
                let p: Vec<T> = (0..d)
                    .map(|k| g.domain.lo[k] + T::lit(rng.gen::<f64>()) * g.domain.extent(k))
                    .collect();
                g.lift(&p).iter().map(|v| v.to_f64_lossy()).collect()
            }
            Carrier::Ifs(f) => {
                let mut b = f.base_box.clone();
                for _ in 0..24 {
                    b = f.maps[rng.gen_range(0..f.maps.len())].apply_box(&b);
                }
                b.center().iter().map(|v| v.to_f64_lossy()).collect()
            }
            Carrier::Discrete(c) => c.points[rng.gen_range(0..c.points.len())]
                .iter()
                .map(|v| v.to_f64_lossy())
                .collect(),
        }
    };

    let seg_len = diam / SEGMENTS as f64;
    let curves: Vec<Vec<Vec<f64>>> = (0..trials)
        .map(|trial| {
            let start = anchor(&mut rng);
            let dirs: Vec<Vec<f64>> = (0..SEGMENTS)
                .map(|_| {
                    if trial == 0 {
                        axis.clone()
                    } else {
                        cone_direction(&mut rng, &axis, alpha)
                    }
                })
                .collect();
            // centre the curve on the anchor
            let mut p = start.clone();
            for dir in dirs.iter().take(SEGMENTS / 2) {
                for k in 0..d {
                    p[k] -= seg_len * dir[k];
                }
            }
            let mut verts = vec![p.clone()];
            for dir in &dirs {
                for k in 0..d {
                    p[k] += seg_len * dir[k];
                }
                verts.push(p.clone());
            }
            verts
        })
        .collect();

    let per_seg = SAMPLES_PER_CURVE / SEGMENTS;
    let ds = seg_len / per_seg as f64;
    let estimates: Vec<f64> = (0..levels.len())
        .map(|level| {
            curves
                .iter()
                .map(|verts| {
                    let mut hits = 0usize;
                    for w in verts.windows(2) {
                        for s in 0..per_seg {
                            let u = (s as f64 + 0.5) / per_seg as f64;
                            let x: Vec<f64> = (0..d).map(|k| w[0][k] + u * (w[1][k] - w[0][k])).collect();
                            if inside(&x, level) {
                                hits += 1;
                            }
                        }
                    }
                    hits as f64 * ds
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let first = estimates[0];
    let last = *estimates.last().unwrap();
    NullTestReport {
        thickening: levels,
        red_flag: first > 0.0 && last > 0.5 * first,
        estimates,
        trials,
    }
}
