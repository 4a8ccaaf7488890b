//! Continuity moduli in the two formats used throughout the crate.
//!
//! * ω-format: `‖x−y‖ ≤ ω(ε, c, r)` implies `‖f(x) − f(y)‖ ≤ ε` for
//!   `x, y` in the ball of radius `r` around `c`.
//! * μ-format: `‖f(x) − f(y)‖ ≤ μ(‖x−y‖)` globally, with μ positive
//!   definite and non-decreasing.
//!
//! Lipschitz moduli are μ-format moduli with a closed-form inverse and get
//! their own variant.

use std::fmt;
use std::sync::Arc;

use crate::error::{positive, Error, Result};

pub type MuFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type OmegaFn = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

const BISECTION_STEPS: usize = 64;

#[derive(Clone)]
pub enum Modulus {
    /// μ(t) = L·t.
    Lipschitz(f64),
    Mu(MuFn),
    Omega(OmegaFn),
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulus::Lipschitz(l) => write!(f, "Lipschitz({l})"),
            Modulus::Mu(_) => write!(f, "Mu(<fn>)"),
            Modulus::Omega(_) => write!(f, "Omega(<fn>)"),
        }
    }
}

impl Modulus {
    pub fn lipschitz(l: f64) -> Self {
        assert!(l >= 0.0 && l.is_finite(), "Lipschitz constant must be finite and >= 0");
        Modulus::Lipschitz(l)
    }

    pub fn mu(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Modulus::Mu(Arc::new(f))
    }

    pub fn omega(f: impl Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Modulus::Omega(Arc::new(f))
    }

    /// The Lipschitz constant, when the modulus is of that kind.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            Modulus::Lipschitz(l) => Some(*l),
            _ => None,
        }
    }

    /// Input-distance bound δ guaranteeing output variation at most `eps`
    /// on the ball `B_r(c)`.
    ///
    /// For μ-format moduli this is a conservative under-approximation of
    /// `sup { t : μ(t) ≤ eps }` found by monotone bisection. May return
    /// `+∞` when the modulus never exceeds `eps`.
    pub fn step(&self, eps: f64, c: &[f64], r: f64) -> Result<f64> {
        positive("precision", eps)?;
        positive("ball radius", r)?;
        match self {
            Modulus::Lipschitz(l) => Ok(lipschitz_step(*l, eps)),
            Modulus::Mu(mu) => Ok(invert_monotone(|t| mu(t), eps)),
            Modulus::Omega(omega) => {
                let d = omega(eps, c, r);
                if d > 0.0 {
                    Ok(d)
                } else {
                    Err(Error::Contract(format!(
                        "omega modulus returned non-positive step {d} for eps = {eps}"
                    )))
                }
            }
        }
    }

    /// Global step for moduli that do not depend on the center.
    pub fn global_step(&self, eps: f64) -> Result<f64> {
        self.step(eps, &[], 1.0)
    }

    /// Upper bound on the output variation between points at distance at
    /// most `t` inside `B_r(c)`.
    ///
    /// For ω-format moduli this inverts ω in its precision argument and is
    /// therefore conservative.
    pub fn variation(&self, t: f64, c: &[f64], r: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Modulus::Lipschitz(l) => product_up(*l, t),
            Modulus::Mu(mu) => mu(t),
            Modulus::Omega(omega) => {
                // Smallest eps with ω(eps) ≥ t, approached from above.
                let mut hi = 1.0;
                let mut grow = 0;
                while omega(hi, c, r) < t {
                    hi *= 2.0;
                    grow += 1;
                    if grow > 1100 {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if omega(mid, c, r) >= t {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// Variation bound for moduli that do not depend on the center.
    pub fn global_variation(&self, t: f64) -> f64 {
        self.variation(t, &[], 1.0)
    }

    /// Modulus of `k·f` given the modulus of `f`.
    pub fn scaled(&self, k: f64) -> Modulus {
        let k = k.abs();
        match self {
            Modulus::Lipschitz(l) => Modulus::Lipschitz(product_up(*l, k)),
            Modulus::Mu(mu) => {
                let mu = mu.clone();
                Modulus::mu(move |t| mu(t) * k)
            }
            Modulus::Omega(omega) => {
                let omega = omega.clone();
                if k == 0.0 {
                    Modulus::Lipschitz(0.0)
                } else {
                    Modulus::omega(move |eps, c, r| omega(eps / k, c, r))
                }
            }
        }
    }
}

fn lipschitz_step(l: f64, eps: f64) -> f64 {
    if l == 0.0 {
        return f64::INFINITY;
    }
    let d = eps / l;
    if d * l > eps {
        d.next_down()
    } else {
        d
    }
}

/// Largest grid-searchable `t` with `mu(t) ≤ eps` for non-decreasing `mu`.
fn invert_monotone(mu: impl Fn(f64) -> f64, eps: f64) -> f64 {
    let mut lo;
    let mut hi;
    if mu(1.0) <= eps {
        lo = 1.0;
        hi = 2.0;
        let mut grow = 0;
        while mu(hi) <= eps {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 1000 {
                return f64::INFINITY;
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        let mut shrink = 0;
        while mu(lo) > eps {
            hi = lo;
            lo *= 0.5;
            shrink += 1;
            if shrink > 1070 || lo == 0.0 {
                return 0.0;
            }
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `a·b` rounded up; exact products are returned unchanged.
pub(crate) fn product_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}
