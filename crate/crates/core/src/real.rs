//! Scalar abstraction shared by the f64 fast path and a double-double type.
//!
//! Orbits that shadow a hyperbolic saddle lose one digit every few time
//! units, so long shadowing runs are evaluated in double-double arithmetic
//! (about 32 significant digits). Everything else runs on plain `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

// 2*pi and pi/2 split into two doubles.
const TWO_PI: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::TAU,
    lo: 2.449_293_598_294_706_4e-16,
};
const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Self { hi, lo }
    }

    /// Reduces to `[-pi, pi]` modulo the double-double value of 2*pi.
    fn reduce_two_pi(self) -> Self {
        let k = (self.hi / TWO_PI.hi).round();
        if k == 0.0 {
            return self;
        }
        self - TWO_PI.mul_f64(k)
    }

    /// Taylor series for (sin r, cos r) with |r| small.
    fn sin_cos_small(r: Self) -> (Self, Self) {
        let r2 = r * r;
        let mut term = r;
        let mut s = r;
        let mut k = 1.0;
        for _ in 0..9 {
            term = -(term * r2) / Self::from_f64((k + 1.0) * (k + 2.0));
            s = s + term;
            k += 2.0;
        }
        let mut term = Self::from_f64(1.0);
        let mut c = term;
        let mut k = 0.0;
        for _ in 0..9 {
            term = -(term * r2) / Self::from_f64((k + 1.0) * (k + 2.0));
            c = c + term;
            k += 2.0;
        }
        (s, c)
    }

    pub fn sin_cos(self) -> (Self, Self) {
        const HALVINGS: i32 = 8;
        let r = self.reduce_two_pi();
        let scaled = r.mul_f64(1.0 / f64::from(1 << HALVINGS));
        let (mut s, mut c) = Self::sin_cos_small(scaled);
        for _ in 0..HALVINGS {
            let s2 = (s * c).mul_f64(2.0);
            let c2 = (c * c - s * s).mul_f64(1.0);
            s = s2;
            c = c2;
        }
        (s, c)
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        v.into()
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn exp(self) -> Self {
        // exp(x) = 2^k * exp(r), |r| <= ln2/2, then square a scaled Taylor sum.
        if self.hi > 709.0 {
            return Self::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::from(0.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).mul_f64(1.0 / 256.0);
        let mut term = Self::from(1.0);
        let mut sum = term;
        for i in 1..16 {
            term = (term * r) / Self::from(f64::from(i));
            sum = sum + term;
        }
        for _ in 0..8 {
            sum = sum * sum;
        }
        let scale = 2f64.powi(k as i32);
        Self {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Self::from(1.0) / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::from(1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(v: f64) -> DoubleDouble {
        DoubleDouble::from(v)
    }

    #[test]
    fn arithmetic_keeps_low_word() {
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0) - dd(1.0);
        assert!(back.to_f64().abs() < 1e-31, "{back:?}");
        let tiny = dd(1.0) + dd(1e-20);
        assert_eq!((tiny - dd(1.0)).to_f64(), 1e-20);
    }

    #[test]
    fn trig_matches_f64_and_pythagoras() {
        for i in -40..=40 {
            let x = f64::from(i) * 0.37;
            let (s, c) = dd(x).sin_cos();
            assert!((s.to_f64() - x.sin()).abs() < 1e-15);
            assert!((c.to_f64() - x.cos()).abs() < 1e-15);
            let one = s * s + c * c - dd(1.0);
            assert!(one.to_f64().abs() < 1e-29, "x={x} {one:?}");
        }
    }

    #[test]
    fn sin_of_small_argument_is_relative_accurate() {
        let x = dd(1e-10);
        let s = x.sin();
        // sin x = x - x^3/6 for this size to far beyond 32 digits
        let expect = x - x * x * x / dd(6.0);
        assert!(((s - expect) / x).to_f64().abs() < 1e-30);
    }

    #[test]
    fn exp_and_powi() {
        for x in [-3.0, -0.5, 0.0, 0.25, 1.0, 5.0] {
            let e = dd(x).exp();
            assert!((e.to_f64() / x.exp() - 1.0).abs() < 1e-15);
        }
        let e1 = dd(1.0).exp();
        let prod = e1 * dd(-1.0).exp() - dd(1.0);
        assert!(prod.to_f64().abs() < 1e-30);
        assert_eq!(dd(2.0).powi(10).to_f64(), 1024.0);
        assert!((dd(2.0).powi(-2).to_f64() - 0.25).abs() < 1e-30);
    }
}
