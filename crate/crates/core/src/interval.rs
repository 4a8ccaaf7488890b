//! Outward-rounded interval arithmetic, used to bound function ranges and
//! derivatives over boxes.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn entire() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).next_up()
    }

    pub fn mid(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn hull(self, other: Self) -> Self {
        Self::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn abs(self) -> Self {
        Self::new(self.mig(), self.mag())
    }

    pub fn sqr(self) -> Self {
        let a = self.mig();
        let b = self.mag();
        Self::new((a * a).next_down().max(0.0), (b * b).next_up())
    }

    pub fn powi(self, k: u32) -> Self {
        match k {
            0 => Self::point(1.0),
            1 => self,
            _ if k % 2 == 0 => {
                let mut acc = Self::point(1.0);
                let s = self.abs();
                for _ in 0..k {
                    acc = acc * s;
                }
                Self::new(acc.lo.max(0.0), acc.hi)
            }
            _ => {
                let mut acc = Self::point(1.0);
                for _ in 0..k {
                    acc = acc * self;
                }
                acc
            }
        }
    }

    pub fn scale(self, k: f64) -> Self {
        self * Self::point(k)
    }

    /// Enclosure of `sin` over the interval.
    pub fn sin(self) -> Self {
        trig_range(self, f64::sin, std::f64::consts::FRAC_PI_2)
    }

    /// Enclosure of `cos` over the interval.
    pub fn cos(self) -> Self {
        trig_range(self, f64::cos, 0.0)
    }
}

/// Range of a unit-amplitude sinusoid whose maxima sit at `peak + 2πk`.
fn trig_range(x: Interval, f: fn(f64) -> f64, peak: f64) -> Interval {
    use std::f64::consts::PI;
    if !(x.lo.is_finite() && x.hi.is_finite()) || x.hi - x.lo >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let a = f(x.lo);
    let b = f(x.hi);
    // libm sin/cos are accurate to about one ulp; pad by a few.
    let pad = 4.0 * f64::EPSILON;
    let mut lo = a.min(b) - pad;
    let mut hi = a.max(b) + pad;
    let contains_shift = |shift: f64| {
        let k = ((x.lo - shift) / (2.0 * PI)).ceil();
        let t = shift + 2.0 * PI * k;
        // A slightly widened test keeps this conservative near endpoints.
        t <= x.hi + 1e-12
    };
    if contains_shift(peak) {
        hi = 1.0;
    }
    if contains_shift(peak + PI) {
        lo = -1.0;
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

impl Add for Interval {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new((self.lo + rhs.lo).next_down(), (self.hi + rhs.hi).next_up())
    }
}

impl Sub for Interval {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new((self.lo - rhs.hi).next_down(), (self.hi - rhs.lo).next_up())
    }
}

impl Neg for Interval {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let c = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        // 0 * inf yields NaN; treat that product as 0.
        let c = c.map(|v| if v.is_nan() { 0.0 } else { v });
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exact = self.lo == self.hi && rhs.lo == rhs.hi && lo == hi && lo == 0.0;
        if exact {
            Self::point(0.0)
        } else {
            Self::new(lo.next_down(), hi.next_up())
        }
    }
}

/// `a + b` rounded toward `+∞`; exact sums are returned unchanged.
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// `a + b` rounded toward `−∞`; exact sums are returned unchanged.
pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    -add_up(-a, -b)
}
