//! Small dense matrix helpers.

use crate::scalar::Real;

/// Determinant by LU factorisation with partial pivoting.
pub fn det<T: Real>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut sign = T::one();
    for c in 0..n {
        let mut p = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[p][c].abs() {
                p = r;
            }
        }
        if a[p][c] == T::zero() {
            return T::zero();
        }
        if p != c {
            a.swap(p, c);
            sign = -sign;
        }
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f == T::zero() {
                continue;
            }
            for k in c..n {
                let v = a[c][k];
                a[r][k] = a[r][k] - f * v;
            }
        }
    }
    (0..n).fold(sign, |acc, i| acc * a[i][i])
}

/// `I + v w^T`.
pub fn rank_one_update<T: Real>(v: &[T], w: &[T]) -> Vec<Vec<T>> {
    let d = v.len();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let id = if a == b { T::one() } else { T::zero() };
                    id + v[a] * w[b]
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<T: Real>(a: &[Vec<T>], v: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (x, y)| acc + *x * *y))
        .collect()
}

/// Upper bound on the spectral norm: square root of the largest Gershgorin row sum of `A^T A`,
/// never above the Frobenius norm.
pub fn operator_norm_bound<T: Real>(a: &[Vec<T>]) -> T {
    let d = a.first().map_or(0, Vec::len);
    let mut ata = vec![vec![T::zero(); d]; d];
    for row in a {
        for i in 0..d {
            for j in 0..d {
                ata[i][j] = ata[i][j] + row[i] * row[j];
            }
        }
    }
    let gersh = ata
        .iter()
        .map(|r| r.iter().fold(T::zero(), |acc, v| acc + v.abs()))
        .fold(T::zero(), T::max);
    let frob = a.iter().flatten().fold(T::zero(), |acc, v| acc + *v * *v);
    let up = T::one() + T::epsilon() * T::lit(16.0);
    gersh.min(frob).sqrt() * up
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_examples() {
        assert_eq!(det(vec![vec![2.0, 0.0], vec![0.0, 3.0]]), 6.0);
        assert_eq!(det(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        let m = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 10.0]];
        assert!((det(m) + 3.0f64).abs() < 1e-12);
        assert_eq!(det(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn rank_one_examples() {
        let m = rank_one_update(&[1.0, 0.0], &[0.3, 0.5]);
        assert!((det(m) - 1.3f64).abs() < 1e-15);
        let m = rank_one_update(&[1.0f64, 1.0], &[-0.5, -0.5]);
        assert!(det(m).abs() < 1e-15);
    }

    #[test]
    fn norm_bounds() {
        assert!((operator_norm_bound(&[vec![2.0, 0.0], vec![0.0, 2.0]]) - 2.0f64).abs() < 1e-14);
        let shear = [vec![1.0, 0.3], vec![0.0, 1.0]];
        let b = operator_norm_bound(&shear);
        // largest singular value of the shear
        let s = ((2.09f64 + (2.09f64 * 2.09 - 4.0).sqrt()) / 2.0).sqrt();
        assert!(b >= s && b < s * 1.05);
    }
}
