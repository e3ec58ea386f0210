use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Closed interval `[lo, hi]` with outward padding after every rounded operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn cast<U: Real>(&self) -> Interval<U> {
        Interval {
            lo: U::lit(self.lo.to_f64_lossy()),
            hi: U::lit(self.hi.to_f64_lossy()),
        }
    }

    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(!(lo > hi), "inverted interval");
        Self { lo, hi }
    }

    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn entire() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    /// Widens by a few ulps so that rounding inside the operation cannot escape.
    pub fn pad(self) -> Self {
        let e = T::epsilon() * T::lit(4.0);
        let lo = self.lo - self.lo.abs() * e - T::min_positive_value();
        let hi = self.hi + self.hi.abs() * e + T::min_positive_value();
        Self { lo, hi }
    }

    pub fn mag(&self) -> T {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value attained.
    pub fn mig(&self) -> T {
        if self.contains(T::zero()) {
            T::zero()
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi).pad()
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo).pad()
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    pub fn scale(&self, c: T) -> Self {
        let (a, b) = (self.lo * c, self.hi * c);
        Self::new(a.min(b), a.max(b)).pad()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        // 0 * inf is NaN; treat as 0 since the interval endpoints are attained values
        let c = c.map(|v| if v.is_nan() { T::zero() } else { v });
        let lo = c.iter().copied().fold(T::infinity(), T::min);
        let hi = c.iter().copied().fold(T::neg_infinity(), T::max);
        Self::new(lo, hi).pad()
    }

    pub fn recip(&self) -> Self {
        if self.contains(T::zero()) {
            return Self::entire();
        }
        Self::new(T::one() / self.hi, T::one() / self.lo).pad()
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    pub fn exp(&self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp()).pad().clamp_lo(T::zero())
    }

    fn clamp_lo(self, v: T) -> Self {
        Self::new(self.lo.max(v), self.hi.max(v))
    }

    fn hits(&self, phase: T) -> bool {
        let two_pi = T::TAU();
        let k = ((self.lo - phase) / two_pi).ceil();
        phase + k * two_pi <= self.hi
    }

    pub fn sin(&self) -> Self {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.width() >= T::TAU() {
            return Self::new(-T::one(), T::one());
        }
        let (a, b) = (self.lo.sin(), self.hi.sin());
        let mut out = Self::new(a.min(b), a.max(b)).pad();
        // padding the phase guards extrema that rounding pushes just outside
        let wide = self.pad().pad();
        if wide.hits(T::FRAC_PI_2()) {
            out.hi = T::one();
        }
        if wide.hits(-T::FRAC_PI_2()) {
            out.lo = -T::one();
        }
        Self::new(out.lo.max(-T::one()), out.hi.min(T::one()))
    }

    pub fn cos(&self) -> Self {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.width() >= T::TAU() {
            return Self::new(-T::one(), T::one());
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut out = Self::new(a.min(b), a.max(b)).pad();
        let wide = self.pad().pad();
        if wide.hits(T::zero()) {
            out.hi = T::one();
        }
        if wide.hits(T::PI()) {
            out.lo = -T::one();
        }
        Self::new(out.lo.max(-T::one()), out.hi.min(T::one()))
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::point(T::one());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        if n.is_multiple_of(2) && n > 0 {
            acc.lo = acc.lo.max(T::zero());
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_ranges() {
        let i = Interval::new(0.0, 3.0).sin();
        assert!(i.hi == 1.0 && i.lo <= 0.0);
        let i = Interval::new(0.1, 0.2).cos();
        assert!(i.lo <= 0.2f64.cos() && i.hi >= 0.1f64.cos() && i.hi < 1.0);
        let i = Interval::new(3.0, 3.5).cos();
        assert_eq!(i.lo, -1.0);
    }

    #[test]
    fn products_contain_samples() {
        let a = Interval::new(-2.0, 3.0);
        let b = Interval::new(-1.0, 0.5);
        let p = a.mul(&b);
        for i in 0..=50 {
            for j in 0..=50 {
                let x = -2.0 + 5.0 * i as f64 / 50.0;
                let y = -1.0 + 1.5 * j as f64 / 50.0;
                assert!(p.contains(x * y));
            }
        }
        assert_eq!(Interval::new(-1.0, 1.0).recip(), Interval::entire());
    }
}
