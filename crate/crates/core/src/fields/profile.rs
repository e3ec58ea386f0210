//! One-dimensional C^1 primitives: cubic smoothstep, integrated cover indicators and
//! the smooth clamp.

use serde::{Deserialize, Serialize};

use super::{FieldError, Interval};
use crate::scalar::Real;

/// `S(u) = 3u^2 - 2u^3` on `[0, 1]`, extended by 0 and 1.
pub fn smoothstep<T: Real>(u: T) -> (T, T) {
    if u <= T::zero() {
        (T::zero(), T::zero())
    } else if u >= T::one() {
        (T::one(), T::zero())
    } else {
        let three = T::lit(3.0);
        let two = T::lit(2.0);
        (u * u * (three - two * u), T::lit(6.0) * u * (T::one() - u))
    }
}

/// Maximum slope of [`smoothstep`].
pub const SMOOTHSTEP_SLOPE: f64 = 1.5;

/// Antiderivative `H` of a slope profile `g` that equals 1 on finitely many closed
/// intervals and ramps to 0 over width `ramp` on both sides.
///
/// `H(-inf) = 0`, `H' = g in [0, 1]`, and `H(+inf) = sum(len_i) + n * ramp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CoverProfile<T> {
    intervals: Vec<(T, T)>,
    ramp: T,
    base: Vec<T>,
}

impl<T: Real> CoverProfile<T> {
    /// Same intervals and ramp; the offsets are recomputed in `U`.
    pub fn cast<U: Real>(&self) -> CoverProfile<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        CoverProfile::new(self.intervals.iter().map(|&(a, b)| (c(a), c(b))).collect(), c(self.ramp)).expect("valid profile stays valid")
    }

    pub fn new(intervals: Vec<(T, T)>, ramp: T) -> Result<Self, FieldError> {
        if !(ramp > T::zero() && ramp.is_finite()) {
            return Err(FieldError::BadParameter(format!("ramp width {ramp} must be positive")));
        }
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(FieldError::BadParameter(format!("interval {i} = [{a}, {b}]")));
            }
            if i > 0 {
                let prev = intervals[i - 1].1;
                if a - ramp < prev + ramp {
                    return Err(FieldError::BadParameter(format!(
                        "ramps around intervals {} and {i} overlap",
                        i - 1
                    )));
                }
            }
        }
        let mut base = Vec::with_capacity(intervals.len());
        let mut acc = T::zero();
        for &(a, b) in &intervals {
            base.push(acc);
            acc = acc + (b - a) + ramp;
        }
        Ok(Self { intervals, ramp, base })
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn ramp(&self) -> T {
        self.ramp
    }

    /// `H(+inf)`, the total rise.
    pub fn rise(&self) -> T {
        match (self.intervals.last(), self.base.last()) {
            (Some(&(a, b)), Some(&base)) => base + (b - a) + self.ramp,
            _ => T::zero(),
        }
    }

    /// Sum of the slope-1 interval lengths.
    pub fn covered_length(&self) -> T {
        self.intervals.iter().fold(T::zero(), |acc, &(a, b)| acc + (b - a))
    }

    fn locate(&self, x: T) -> Option<usize> {
        let w = self.ramp;
        let n = self.intervals.partition_point(|&(a, _)| a - w <= x);
        n.checked_sub(1)
    }

    /// `(H(x), g(x))`.
    pub fn eval(&self, x: T) -> (T, T) {
        let Some(i) = self.locate(x) else {
            return (T::zero(), T::zero());
        };
        let (a, b) = self.intervals[i];
        let w = self.ramp;
        let half = T::lit(0.5);
        let base = self.base[i];
        if x < a {
            let u = (x - (a - w)) / w;
            let (g, _) = smoothstep(u);
            let u3 = u * u * u;
            (base + w * (u3 - half * u3 * u), g)
        } else if x <= b {
            (base + half * w + (x - a), T::one())
        } else if x < b + w {
            let u = (x - b) / w;
            let (s, _) = smoothstep(u);
            let u3 = u * u * u;
            (base + half * w + (b - a) + w * (u - u3 + half * u3 * u), T::one() - s)
        } else {
            (base + (b - a) + w, T::zero())
        }
    }

    /// `g'(x)`; continuous except that it is only piecewise smooth.
    pub fn slope_derivative(&self, x: T) -> T {
        let Some(i) = self.locate(x) else {
            return T::zero();
        };
        let (a, b) = self.intervals[i];
        let w = self.ramp;
        if x < a {
            smoothstep((x - (a - w)) / w).1 / w
        } else if x > b && x < b + w {
            -smoothstep((x - b) / w).1 / w
        } else {
            T::zero()
        }
    }

    pub fn value_bounds(&self, arg: &Interval<T>) -> Interval<T> {
        let lo = if arg.lo.is_finite() { self.eval(arg.lo).0 } else { T::zero() };
        let hi = if arg.hi.is_finite() { self.eval(arg.hi).0 } else { self.rise() };
        Interval::new(lo, hi).pad()
    }

    /// Upper bound of `g` over `arg`.
    pub fn slope_bound(&self, arg: &Interval<T>) -> T {
        let w = self.ramp;
        // first interval whose right ramp end is past arg.lo
        let i = self.intervals.partition_point(|&(_, b)| b + w <= arg.lo);
        match self.intervals.get(i) {
            Some(&(a, _)) if a - w < arg.hi => T::one(),
            _ => T::zero(),
        }
    }

    pub fn feature_scale(&self) -> T {
        let mut s = self.ramp;
        for &(a, b) in &self.intervals {
            if b > a {
                s = s.min(b - a);
            }
        }
        s
    }
}

/// Plateau profile `h`: `h' = 1` on `[-plateau, plateau]`, `h' = 0` outside
/// `[-plateau - transition, plateau + transition]`, rise `2 plateau + transition`.
pub fn plateau_profile<T: Real>(zeta: T, plateau: T, transition: T) -> Result<CoverProfile<T>, FieldError> {
    if !(zeta > T::zero() && plateau > T::zero() && transition > T::zero()) {
        return Err(FieldError::BadParameter(
            "plateau profile needs positive zeta, plateau, transition".into(),
        ));
    }
    let two = T::lit(2.0);
    if two * plateau + transition > zeta {
        return Err(FieldError::BadParameter(format!(
            "rise {} exceeds zeta {zeta}",
            two * plateau + transition
        )));
    }
    CoverProfile::new(vec![(-plateau, plateau)], transition)
}

/// Default plateau profile with plateau and transition `zeta / 4`.
pub fn default_plateau<T: Real>(zeta: T) -> Result<CoverProfile<T>, FieldError> {
    let q = zeta * T::lit(0.25);
    plateau_profile(zeta, q, q)
}

/// C^1 clamp: identity on `[-m, m]`, quadratic knee over `[m, m + 2k]`, constant `m + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SmoothClamp<T> {
    pub limit: T,
    pub knee: T,
}

impl<T: Real> SmoothClamp<T> {
    pub fn cast<U: Real>(&self) -> SmoothClamp<U> {
        SmoothClamp {
            limit: U::lit(self.limit.to_f64_lossy()),
            knee: U::lit(self.knee.to_f64_lossy()),
        }
    }

    pub fn new(limit: T, knee: T) -> Result<Self, FieldError> {
        if !(limit >= T::zero() && knee > T::zero()) {
            return Err(FieldError::BadParameter(format!("clamp limit {limit}, knee {knee}")));
        }
        Ok(Self { limit, knee })
    }

    pub fn eval(&self, x: T) -> (T, T) {
        let (m, k) = (self.limit, self.knee);
        let ax = x.abs();
        let s = x.signum();
        if ax <= m {
            (x, T::one())
        } else if ax < m + T::lit(2.0) * k {
            let e = ax - m;
            (s * (ax - e * e / (T::lit(4.0) * k)), T::one() - e / (T::lit(2.0) * k))
        } else {
            (s * (m + k), T::zero())
        }
    }

    pub fn sup(&self) -> T {
        self.limit + self.knee
    }
}
