use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Aabb;

fn uniform_in<R: Rng>(rng: &mut R, b: &Aabb<f64>) -> Vec<f64> {
    (0..b.dim()).map(|k| b.lo[k] + rng.gen::<f64>() * b.extent(k)).collect()
}

fn unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.max(lo).ln());
    (a + rng.gen::<f64>() * (b - a)).exp()
}

/// Points spread over `region`, every other one placed near a random anchor at a log-uniform offset.
pub(crate) fn points<R: Rng>(rng: &mut R, region: &Aabb<f64>, anchors: &[Vec<f64>], n: usize, min_scale: f64) -> Vec<Vec<f64>> {
    let diam = region.diameter();
    (0..n)
        .map(|i| {
            if i % 2 == 0 || anchors.is_empty() {
                uniform_in(rng, region)
            } else {
                let a = &anchors[rng.gen_range(0..anchors.len())];
                let r = log_uniform(rng, min_scale, 1e-2 * diam);
                let u = unit(rng, a.len());
                a.iter().zip(&u).map(|(x, v)| x + r * v).collect()
            }
        })
        .collect()
}

/// Pairs `(x, x + r u)` with `r` log-uniform in `[min_scale, diam]`.
pub(crate) fn pairs<R: Rng>(rng: &mut R, region: &Aabb<f64>, anchors: &[Vec<f64>], n: usize, min_scale: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let diam = region.diameter();
    let base = points(rng, region, anchors, n, min_scale);
    base.into_iter()
        .map(|x| {
            let r = log_uniform(rng, min_scale, diam);
            let u = unit(rng, x.len());
            let y = x.iter().zip(&u).map(|(a, b)| a + r * b).collect();
            (x, y)
        })
        .collect()
}
