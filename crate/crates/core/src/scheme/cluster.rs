//! Greedy covers and label-pure axis splits.

use crate::scalar::Real;

fn dist2<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y))
}

/// Farthest-point centres at radius `rho/2`; each atom joins the first centre within reach.
///
/// Returns clusters as lists of positions into `atoms`, in centre order.
pub fn greedy_cover_partition<T: Real>(points: &[&[T]], rho: T) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let r = rho * T::lit(0.5);
    let r2 = r * r;
    let mut centers = vec![0usize];
    let mut near: Vec<T> = points.iter().map(|p| dist2(p, points[0])).collect();
    loop {
        let mut far = 0;
        for i in 1..n {
            if near[i] > near[far] {
                far = i;
            }
        }
        if near[far] <= r2 {
            break;
        }
        centers.push(far);
        for i in 0..n {
            near[i] = near[i].min(dist2(points[i], points[far]));
        }
    }
    let mut clusters = vec![Vec::new(); centers.len()];
    for i in 0..n {
        let c = centers
            .iter()
            .position(|&c| dist2(points[i], points[c]) <= r2)
            .expect("every atom is within reach of some centre");
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

pub struct Leaf<T> {
    pub atoms: Vec<usize>,
    pub margin: T,
}

pub struct SplitOutcome<T> {
    pub leaves: Vec<Leaf<T>>,
    pub dropped: Vec<usize>,
}

/// Recursively splits `atoms` by axis-aligned planes through the widest coordinate gap
/// until each part carries one label. `margin` of a leaf is the narrowest gap on its path.
///
/// Parts whose widest gap is at most `floor` keep only the label of their heaviest atom.
pub fn label_split<T: Real>(points: &[Vec<T>], weights: &[T], labels: &[usize], atoms: Vec<usize>, margin: T, floor: T) -> SplitOutcome<T> {
    let mut out = SplitOutcome {
        leaves: Vec::new(),
        dropped: Vec::new(),
    };
    let mut stack = vec![(atoms, margin)];
    while let Some((set, m)) = stack.pop() {
        if set.is_empty() {
            continue;
        }
        let first = labels[set[0]];
        if set.iter().all(|&i| labels[i] == first) {
            out.leaves.push(Leaf { atoms: set, margin: m });
            continue;
        }
        let d = points[set[0]].len();
        // (gap, distance to median rank, axis, threshold)
        let mut best: Option<(T, usize, usize, T)> = None;
        let mid = set.len() / 2;
        for k in 0..d {
            let mut vals: Vec<T> = set.iter().map(|&i| points[i][k]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for j in 1..vals.len() {
                let gap = vals[j] - vals[j - 1];
                if gap <= T::zero() {
                    continue;
                }
                let off = j.abs_diff(mid);
                let better = match best {
                    None => true,
                    Some((g, o, _, _)) => {
                        let tie = (gap - g).abs() <= T::lit(1e-6) * g;
                        if tie {
                            off < o
                        } else {
                            gap > g
                        }
                    }
                };
                if better {
                    best = Some((gap, off, k, vals[j - 1] + gap * T::lit(0.5)));
                }
            }
        }
        match best {
            Some((gap, _, k, cut)) if gap > floor => {
                let (lo, hi): (Vec<usize>, Vec<usize>) = set.iter().partition(|&&i| points[i][k] < cut);
                let cm = m.min(gap);
                stack.push((hi, cm));
                stack.push((lo, cm));
            }
            _ => {
                let mut keep = set[0];
                for &i in &set {
                    if weights[i] > weights[keep] {
                        keep = i;
                    }
                }
                let lab = labels[keep];
                let (kept, gone): (Vec<usize>, Vec<usize>) = set.into_iter().partition(|&i| labels[i] == lab);
                out.dropped.extend(gone);
                stack.push((kept, m));
            }
        }
    }
    out.dropped.sort_unstable();
    out
}
