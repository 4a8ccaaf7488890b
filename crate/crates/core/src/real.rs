//! Floating-point approximations carrying an explicit error radius.
//!
//! A [`CertifiedReal`] stands for every real number within `radius` of
//! `value`. Each arithmetic operation propagates the input radii and then
//! inflates the result by one rounding unit, so the enclosure stays sound
//! under IEEE round-to-nearest.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const U: f64 = f64::EPSILON;

/// Inflate a propagated radius so it also covers the rounding of `value`
/// and of the radius computation itself.
fn settle(value: f64, propagated: f64) -> f64 {
    let r = propagated * (1.0 + 4.0 * U) + value.abs() * U + f64::from_bits(1);
    r.next_up()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedReal {
    pub value: f64,
    pub radius: f64,
}

impl CertifiedReal {
    pub fn new(value: f64, radius: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Argument(format!("value must be finite, got {value}")));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Argument(format!(
                "radius must be finite and non-negative, got {radius}"
            )));
        }
        Ok(Self { value, radius })
    }

    /// An exactly known number (radius zero).
    pub const fn exact(value: f64) -> Self {
        Self { value, radius: 0.0 }
    }

    /// Constructor for internal use where the caller already guarantees the
    /// invariants.
    pub(crate) fn raw(value: f64, radius: f64) -> Self {
        debug_assert!(radius >= 0.0, "negative radius {radius}");
        Self { value, radius }
    }

    /// Smallest interval `[lo, hi]` containing every represented real,
    /// rounded outward.
    pub fn lo(&self) -> f64 {
        if self.radius == 0.0 {
            self.value
        } else {
            (self.value - self.radius).next_down()
        }
    }

    pub fn hi(&self) -> f64 {
        if self.radius == 0.0 {
            self.value
        } else {
            (self.value + self.radius).next_up()
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }

    /// Decided strictly below zero.
    pub fn is_negative(&self) -> bool {
        self.hi() < 0.0
    }

    /// Decided strictly above zero.
    pub fn is_positive(&self) -> bool {
        self.lo() > 0.0
    }

    /// Comparison that only answers when the enclosures are disjoint; `None`
    /// means the order cannot be decided at the current precision.
    pub fn decide_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.hi() < other.lo() {
            Some(Ordering::Less)
        } else if self.lo() > other.hi() {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    pub fn abs(self) -> Self {
        let v = self.value.abs();
        Self::raw(v, settle(v, self.radius))
    }

    pub fn max(self, other: Self) -> Self {
        let v = self.value.max(other.value);
        Self::raw(v, settle(v, self.radius.max(other.radius)))
    }

    pub fn min(self, other: Self) -> Self {
        let v = self.value.min(other.value);
        Self::raw(v, settle(v, self.radius.max(other.radius)))
    }

    pub fn scale(self, k: f64) -> Self {
        let v = self.value * k;
        Self::raw(v, settle(v, self.radius * k.abs()))
    }

    /// A value computed by `ops` floating-point operations on quantities of
    /// size at most `magnitude`, with an analytic error bound `radius`.
    pub fn estimate(value: f64, radius: f64, magnitude: f64, ops: u32) -> Result<Self> {
        let slack = ops as f64 * U * magnitude.abs();
        Self::new(value, settle(value, radius + slack))
    }

    /// Widen the radius by an extra, already-certified error term.
    pub fn widen(self, extra: f64) -> Self {
        debug_assert!(extra >= 0.0);
        Self::raw(self.value, (self.radius + extra).next_up())
    }
}

impl From<f64> for CertifiedReal {
    fn from(value: f64) -> Self {
        Self::exact(value)
    }
}

impl Add for CertifiedReal {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let v = self.value + rhs.value;
        Self::raw(v, settle(v, self.radius + rhs.radius))
    }
}

impl Sub for CertifiedReal {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let v = self.value - rhs.value;
        Self::raw(v, settle(v, self.radius + rhs.radius))
    }
}

impl Mul for CertifiedReal {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let v = self.value * rhs.value;
        let prop = self.value.abs() * rhs.radius
            + rhs.value.abs() * self.radius
            + self.radius * rhs.radius;
        Self::raw(v, settle(v, prop))
    }
}

impl Neg for CertifiedReal {
    type Output = Self;
    fn neg(self) -> Self {
        Self::raw(-self.value, self.radius)
    }
}

impl fmt::Display for CertifiedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {:e}", self.value, self.radius)
    }
}
