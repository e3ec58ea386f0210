//! Closed cones `C(e, a) = { v : v.e >= cos(a) |v| }`, linear subspaces and the
//! transversality predicate between them.

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::scalar::{dot, norm, Real};

/// Unit vector in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", transparent)]
pub struct Direction<T> {
    components: Vec<T>,
}

impl<T: Real> Direction<T> {
    /// Accepts a vector whose norm is already 1 within the frame tolerance.
    pub fn from_unit(components: Vec<T>) -> Result<Self, GeometryError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = norm(&components);
        if (n - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(GeometryError::NotUnit(n.to_f64_lossy()));
        }
        Ok(Self { components })
    }

    /// Normalizes a non-zero finite vector.
    pub fn normalize(v: &[T]) -> Result<Self, GeometryError> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = norm(v);
        if n == T::zero() {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self {
            components: v.iter().map(|&c| c / n).collect(),
        })
    }

    /// The coordinate direction `sign * e_k`.
    pub fn axis(d: usize, k: usize, sign: T) -> Self {
        let mut components = vec![T::zero(); d];
        components[k] = sign.signum();
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.components
    }

    pub fn neg(&self) -> Self {
        Self {
            components: self.components.iter().map(|&c| -c).collect(),
        }
    }

    /// `Some((k, sign))` when this is exactly a signed coordinate axis.
    pub fn coordinate_axis(&self) -> Option<(usize, T)> {
        let mut found = None;
        for (k, &c) in self.components.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            if c.abs() != T::one() || found.is_some() {
                return None;
            }
            found = Some((k, c));
        }
        found
    }
}

/// Closed cone with unit axis and half-angle in `(0, pi/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Cone<T> {
    pub axis: Direction<T>,
    pub half_angle: T,
}

impl<T: Real> Cone<T> {
    pub fn new(axis: Direction<T>, half_angle: T) -> Result<Self, GeometryError> {
        check_angle(half_angle)?;
        Ok(Self { axis, half_angle })
    }

    pub fn dim(&self) -> usize {
        self.axis.dim()
    }

    /// `v . axis >= cos(half_angle) |v|`; the zero vector belongs to every cone.
    pub fn contains(&self, v: &[T]) -> Result<bool, GeometryError> {
        if v.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(dot(v, self.axis.as_slice()) >= self.half_angle.cos() * norm(v))
    }

    /// The reflected cone `C(-e, a)`.
    pub fn reflected(&self) -> Self {
        Self {
            axis: self.axis.neg(),
            half_angle: self.half_angle,
        }
    }

    pub fn cot(&self) -> T {
        T::one() / self.half_angle.tan()
    }

    pub fn c_alpha(&self) -> T {
        T::one() + self.cot()
    }
}

fn check_angle<T: Real>(alpha: T) -> Result<(), GeometryError> {
    if !(alpha > T::zero() && alpha < T::FRAC_PI_2()) {
        return Err(GeometryError::AngleOutOfRange(alpha.to_f64_lossy()));
    }
    Ok(())
}

/// Gradient-bound constant `1 + 1/tan(alpha)` of a width function.
pub fn c_alpha<T: Real>(alpha: T) -> Result<T, GeometryError> {
    check_angle(alpha)?;
    Ok(T::one() + T::one() / alpha.tan())
}

/// Linear subspace of `R^d` stored through an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Subspace<T> {
    ambient: usize,
    basis: Vec<Vec<T>>,
}

impl<T: Real> Subspace<T> {
    /// Validates an orthonormal basis.
    pub fn from_orthonormal(ambient: usize, basis: Vec<Vec<T>>) -> Result<Self, GeometryError> {
        let tol = T::frame_tolerance();
        for (i, b) in basis.iter().enumerate() {
            if b.len() != ambient {
                return Err(GeometryError::DimensionMismatch {
                    expected: ambient,
                    got: b.len(),
                });
            }
            for (j, c) in basis.iter().enumerate().skip(i) {
                let target = if i == j { T::one() } else { T::zero() };
                if (dot(b, c) - target).abs() > tol {
                    return Err(GeometryError::NotOrthonormal);
                }
            }
        }
        if basis.len() > ambient {
            return Err(GeometryError::NotOrthonormal);
        }
        Ok(Self { ambient, basis })
    }

    /// Span of arbitrary vectors via modified Gram-Schmidt; dependent vectors are skipped.
    pub fn span(ambient: usize, vectors: &[Vec<T>]) -> Self {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        let mut basis: Vec<Vec<T>> = Vec::new();
        for v in vectors {
            let mut w = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    for k in 0..ambient {
                        w[k] = w[k] - c * b[k];
                    }
                }
            }
            let n = norm(&w);
            if n > tol * norm(v).max(T::one()) {
                basis.push(w.iter().map(|&x| x / n).collect());
            }
        }
        Self { ambient, basis }
    }

    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        let basis = (0..ambient)
            .map(|k| {
                let mut e = vec![T::zero(); ambient];
                e[k] = T::one();
                e
            })
            .collect();
        Self { ambient, basis }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.ambient
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.ambient];
        for b in &self.basis {
            let c = dot(v, b);
            for k in 0..self.ambient {
                out[k] = out[k] + c * b[k];
            }
        }
        out
    }

    /// `L ∩ C = {0}`, decided by `|P_L(axis)| < cos(half_angle)`.
    ///
    /// The boundary case `|P_L(axis)| = cos(half_angle)` counts as not transverse.
    pub fn transverse_to(&self, cone: &Cone<T>) -> bool {
        if self.is_full() {
            return false;
        }
        norm(&self.project(cone.axis.as_slice())) < cone.half_angle.cos()
    }
}

/// Free-function form of [`Subspace::transverse_to`].
pub fn subspace_transverse<T: Real>(l: &Subspace<T>, c: &Cone<T>) -> bool {
    l.transverse_to(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn e(d: usize, k: usize) -> Direction<f64> {
        Direction::axis(d, k, 1.0)
    }

    #[test]
    fn containment_examples() {
        let c = Cone::new(e(2, 0), FRAC_PI_4).unwrap();
        assert!(c.contains(&[1.0, 0.0]).unwrap());
        assert!(!c.contains(&[0.0, 1.0]).unwrap());
        assert!(c.contains(&[0.0, 0.0]).unwrap());
        // boundary: (1,1).(1,0) = 1 and cos(pi/4) * sqrt(2) rounds to 1.0000000000000002
        let lhs = 1.0f64;
        let rhs = FRAC_PI_4.cos() * 2f64.sqrt();
        assert_eq!(c.contains(&[1.0, 1.0]).unwrap(), lhs >= rhs);
        assert!((lhs - rhs).abs() < 1e-15);
        assert!(c.contains(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn c_alpha_values() {
        assert!((c_alpha(FRAC_PI_4).unwrap() - 2.0).abs() < 1e-15);
        assert!((c_alpha(FRAC_PI_3).unwrap() - 1.577_350_269_189_625_7).abs() < 1e-12);
        assert!(c_alpha(FRAC_PI_2 - 1e-9).unwrap() < 1.0 + 1e-8);
        assert!(c_alpha(0.0f64).is_err());
        assert!(c_alpha(FRAC_PI_2).is_err());
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let a = FRAC_PI_2 * i as f64 / 1000.0;
            let c = c_alpha(a).unwrap();
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn transversality_examples() {
        let c = Cone::new(e(2, 0), FRAC_PI_4).unwrap();
        let l = Subspace::span(2, &[vec![0.0, 1.0]]);
        assert!(l.transverse_to(&c));
        let l = Subspace::span(2, &[vec![1.0, 0.0]]);
        assert!(!l.transverse_to(&c));
        assert!(!Subspace::<f64>::full(2).transverse_to(&c));
        assert!(Subspace::<f64>::zero(2).transverse_to(&c));
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(Subspace::from_orthonormal(2, vec![vec![1.0, 0.0], vec![0.5, 0.5]]).is_err());
        assert!(Direction::from_unit(vec![1.0, 1.0]).is_err());
        assert!(Cone::new(e(2, 0), FRAC_PI_2).is_err());
    }

    #[test]
    fn net_angle_arithmetic() {
        for i in 1..10_000 {
            let a = FRAC_PI_2 * i as f64 / 10_000.0;
            assert!((0.5 * (FRAC_PI_2 - a)).sin() < a.cos());
        }
    }

    #[test]
    fn generic_over_f32() {
        let c = Cone::new(Direction::<f32>::axis(3, 2, 1.0), std::f32::consts::FRAC_PI_4).unwrap();
        let l = Subspace::<f32>::span(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.1]]);
        assert!(l.transverse_to(&c));
    }
}
