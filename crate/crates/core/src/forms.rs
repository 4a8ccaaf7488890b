//! Registry of declarative function forms.
//!
//! Configs describe functions as trees of these forms instead of free-text
//! expressions. Every form knows how to evaluate itself, its gradient, and
//! interval enclosures of both over a box, which is where the Lipschitz data
//! needed by the certified modules comes from.
//!
//! Arguments are flat vectors; `var` picks a component. Callers decide the
//! layout, e.g. `[x.., θ..]` for parametric objectives or `[x.., u..]` for
//! controlled dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::interval::Interval;
use crate::modulus::Modulus;

/// Names accepted in the `kind` field, for error messages.
pub const REGISTRY: &[&str] = &[
    "constant",
    "polynomial",
    "piecewise_linear",
    "trig",
    "norm",
    "sum",
    "product",
    "compose",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnForm {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[k] · x[var]^k`.
    Polynomial {
        #[serde(default)]
        var: usize,
        coeffs: Vec<f64>,
    },
    /// Linear interpolation through `knots` (sorted by abscissa), constant
    /// beyond the end knots.
    PiecewiseLinear {
        #[serde(default)]
        var: usize,
        knots: Vec<[f64; 2]>,
    },
    /// `amp · func(freq · x[var] + phase)`.
    Trig {
        #[serde(default)]
        var: usize,
        func: TrigKind,
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `scale · ‖(x[v] for v in vars)‖₂`.
    Norm {
        vars: Vec<usize>,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<FnForm>,
    },
    Product {
        factors: Vec<FnForm>,
    },
    /// `outer(inner(x))`; `outer` must only use variable 0.
    Compose {
        outer: Box<FnForm>,
        inner: Box<FnForm>,
    },
}

fn one() -> f64 {
    1.0
}

fn sqrt_interval(x: Interval) -> Interval {
    let lo = x.lo.max(0.0).sqrt().next_down().max(0.0);
    let hi = x.hi.max(0.0).sqrt().next_up();
    Interval::new(lo, hi)
}

impl FnForm {
    /// Checks structural constraints and returns the number of arguments
    /// the form reads.
    pub fn validate(&self) -> Result<usize> {
        match self {
            FnForm::Constant { value } => finite(*value).map(|_| 0),
            FnForm::Polynomial { var, coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::Argument("polynomial needs at least one coefficient".into()));
                }
                coeffs.iter().try_for_each(|c| finite(*c))?;
                Ok(var + 1)
            }
            FnForm::PiecewiseLinear { var, knots } => {
                if knots.is_empty() {
                    return Err(Error::Argument("piecewise_linear needs knots".into()));
                }
                if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    return Err(Error::Argument("piecewise_linear knots must be strictly increasing".into()));
                }
                Ok(var + 1)
            }
            FnForm::Trig { var, amp, freq, phase, .. } => {
                finite(*amp)?;
                finite(*freq)?;
                finite(*phase)?;
                Ok(var + 1)
            }
            FnForm::Norm { vars, scale } => {
                finite(*scale)?;
                if vars.is_empty() {
                    return Err(Error::Argument("norm needs at least one variable".into()));
                }
                Ok(vars.iter().max().unwrap() + 1)
            }
            FnForm::Sum { terms } => terms.iter().try_fold(0, |m, t| Ok(m.max(t.validate()?))),
            FnForm::Product { factors } => factors.iter().try_fold(0, |m, t| Ok(m.max(t.validate()?))),
            FnForm::Compose { outer, inner } => {
                if outer.validate()? > 1 {
                    return Err(Error::Argument("compose: outer form may only use variable 0".into()));
                }
                inner.validate()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            FnForm::Constant { value } => *value,
            FnForm::Polynomial { var, coeffs } => {
                let t = x[*var];
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            FnForm::PiecewiseLinear { var, knots } => pwl_eval(knots, x[*var]),
            FnForm::Trig { var, func, amp, freq, phase } => {
                let arg = freq * x[*var] + phase;
                amp * match func {
                    TrigKind::Sin => arg.sin(),
                    TrigKind::Cos => arg.cos(),
                }
            }
            FnForm::Norm { vars, scale } => scale * vars.iter().map(|&v| x[v] * x[v]).sum::<f64>().sqrt(),
            FnForm::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            FnForm::Product { factors } => factors.iter().map(|t| t.eval(x)).product(),
            FnForm::Compose { outer, inner } => outer.eval(&[inner.eval(x)]),
        }
    }

    /// Gradient with respect to the first `dim` arguments. At kinks of
    /// piecewise-linear and norm forms a one-sided derivative is returned.
    pub fn grad(&self, x: &[f64], dim: usize) -> Vec<f64> {
        let mut g = vec![0.0; dim];
        self.grad_into(x, 1.0, &mut g);
        g
    }

    fn grad_into(&self, x: &[f64], weight: f64, g: &mut [f64]) {
        match self {
            FnForm::Constant { .. } => {}
            FnForm::Polynomial { var, coeffs } => {
                if *var < g.len() {
                    let t = x[*var];
                    let d = coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .rev()
                        .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c);
                    g[*var] += weight * d;
                }
            }
            FnForm::PiecewiseLinear { var, knots } => {
                if *var < g.len() {
                    g[*var] += weight * pwl_slope(knots, x[*var]);
                }
            }
            FnForm::Trig { var, func, amp, freq, phase } => {
                if *var < g.len() {
                    let arg = freq * x[*var] + phase;
                    let d = match func {
                        TrigKind::Sin => arg.cos(),
                        TrigKind::Cos => -arg.sin(),
                    };
                    g[*var] += weight * amp * freq * d;
                }
            }
            FnForm::Norm { vars, scale } => {
                let n = vars.iter().map(|&v| x[v] * x[v]).sum::<f64>().sqrt();
                if n > 0.0 {
                    for &v in vars {
                        if v < g.len() {
                            g[v] += weight * scale * x[v] / n;
                        }
                    }
                }
            }
            FnForm::Sum { terms } => terms.iter().for_each(|t| t.grad_into(x, weight, g)),
            FnForm::Product { factors } => {
                for (i, f) in factors.iter().enumerate() {
                    let others: f64 = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, h)| h.eval(x))
                        .product();
                    f.grad_into(x, weight * others, g);
                }
            }
            FnForm::Compose { outer, inner } => {
                let d = outer.grad(&[inner.eval(x)], 1)[0];
                inner.grad_into(x, weight * d, g);
            }
        }
    }

    /// Interval enclosure of the range over the box `bx`.
    pub fn range(&self, bx: &[Interval]) -> Interval {
        match self {
            FnForm::Constant { value } => Interval::point(*value),
            FnForm::Polynomial { var, coeffs } => {
                let t = bx[*var];
                // Power basis, each power enclosed separately.
                coeffs
                    .iter()
                    .enumerate()
                    .fold(Interval::point(0.0), |acc, (k, c)| acc + t.powi(k as u32).scale(*c))
            }
            FnForm::PiecewiseLinear { var, knots } => pwl_range(knots, bx[*var]),
            FnForm::Trig { var, func, amp, freq, phase } => {
                let arg = bx[*var].scale(*freq) + Interval::point(*phase);
                let s = match func {
                    TrigKind::Sin => arg.sin(),
                    TrigKind::Cos => arg.cos(),
                };
                s.scale(*amp)
            }
            FnForm::Norm { vars, scale } => {
                let sq = vars.iter().fold(Interval::point(0.0), |acc, &v| acc + bx[v].sqr());
                sqrt_interval(sq).scale(*scale)
            }
            FnForm::Sum { terms } => terms.iter().fold(Interval::point(0.0), |acc, t| acc + t.range(bx)),
            FnForm::Product { factors } => {
                factors.iter().fold(Interval::point(1.0), |acc, t| acc * t.range(bx))
            }
            FnForm::Compose { outer, inner } => outer.range(&[inner.range(bx)]),
        }
    }

    /// Interval enclosure of the gradient (first `dim` components) over
    /// `bx`. Kinks contribute the hull of the one-sided slopes.
    pub fn grad_range(&self, bx: &[Interval], dim: usize) -> Vec<Interval> {
        let mut g = vec![Interval::point(0.0); dim];
        self.grad_range_into(bx, Interval::point(1.0), &mut g);
        g
    }

    fn grad_range_into(&self, bx: &[Interval], weight: Interval, g: &mut [Interval]) {
        match self {
            FnForm::Constant { .. } => {}
            FnForm::Polynomial { var, coeffs } => {
                if *var < g.len() {
                    let t = bx[*var];
                    let d = coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .fold(Interval::point(0.0), |acc, (k, c)| {
                            acc + t.powi(k as u32 - 1).scale(k as f64 * c)
                        });
                    g[*var] = g[*var] + weight * d;
                }
            }
            FnForm::PiecewiseLinear { var, knots } => {
                if *var < g.len() {
                    g[*var] = g[*var] + weight * pwl_slope_range(knots, bx[*var]);
                }
            }
            FnForm::Trig { var, func, amp, freq, phase } => {
                if *var < g.len() {
                    let arg = bx[*var].scale(*freq) + Interval::point(*phase);
                    let d = match func {
                        TrigKind::Sin => arg.cos(),
                        TrigKind::Cos => -arg.sin(),
                    };
                    g[*var] = g[*var] + weight * d.scale(amp * freq);
                }
            }
            FnForm::Norm { vars, scale } => {
                // Each partial is scale·x_v/‖x‖ ∈ [−|scale|, |scale|].
                let s = scale.abs();
                for &v in vars {
                    if v < g.len() {
                        g[v] = g[v] + weight * Interval::new(-s, s);
                    }
                }
            }
            FnForm::Sum { terms } => terms.iter().for_each(|t| t.grad_range_into(bx, weight, g)),
            FnForm::Product { factors } => {
                for (i, f) in factors.iter().enumerate() {
                    let others = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .fold(Interval::point(1.0), |acc, (_, h)| acc * h.range(bx));
                    f.grad_range_into(bx, weight * others, g);
                }
            }
            FnForm::Compose { outer, inner } => {
                let d = outer.grad_range(&[inner.range(bx)], 1)[0];
                inner.grad_range_into(bx, weight * d, g);
            }
        }
    }

    /// Euclidean Lipschitz bound over the box spanned by `lo`, `hi` with
    /// respect to the first `dim` arguments.
    pub fn lipschitz_on(&self, lo: &[f64], hi: &[f64], dim: usize) -> f64 {
        let bx: Vec<Interval> = lo.iter().zip(hi).map(|(&a, &b)| Interval::new(a, b)).collect();
        let g = self.grad_range(&bx, dim);
        let s: f64 = g.iter().map(|i| i.mag() * i.mag()).sum();
        s.sqrt().next_up()
    }

    /// Euclidean Lipschitz bound over the box with respect to the arguments
    /// in `vars` only.
    pub fn partial_lipschitz(&self, lo: &[f64], hi: &[f64], vars: std::ops::Range<usize>) -> f64 {
        let bx: Vec<Interval> = lo.iter().zip(hi).map(|(&a, &b)| Interval::new(a, b)).collect();
        let g = self.grad_range(&bx, vars.end);
        let s: f64 = g[vars].iter().map(|i| i.mag() * i.mag()).sum();
        s.sqrt().next_up()
    }

    /// Enclosure of the value at a point.
    pub fn eval_enclosure(&self, x: &[f64]) -> Interval {
        let bx: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        self.range(&bx)
    }

    /// Compile into a [`ScalarFn`] whose global modulus is the Lipschitz
    /// bound over `[lo, hi]` and whose local bounds come from interval
    /// enclosures of the gradient.
    pub fn to_scalar_fn(&self, lo: &[f64], hi: &[f64]) -> Result<ScalarFn> {
        let needed = self.validate()?;
        let dim = lo.len();
        if needed > dim {
            return Err(Error::Argument(format!(
                "function form reads {needed} variables but the domain has {dim}"
            )));
        }
        let lip = self.lipschitz_on(lo, hi, dim);
        if !lip.is_finite() {
            return Err(Error::Argument("function form has unbounded gradient on the domain".into()));
        }
        let eval = self.clone();
        let local = self.clone();
        Ok(ScalarFn::new(move |x| eval.eval(x), Modulus::lipschitz(lip))
            .with_local_lipschitz(move |a, b| local.lipschitz_on(a, b, a.len())))
    }
}

fn finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("non-finite parameter {v}")))
    }
}

fn pwl_eval(knots: &[[f64; 2]], t: f64) -> f64 {
    if t <= knots[0][0] {
        return knots[0][1];
    }
    let last = knots[knots.len() - 1];
    if t >= last[0] {
        return last[1];
    }
    let i = knots.partition_point(|k| k[0] <= t) - 1;
    let (a, b) = (knots[i], knots[i + 1]);
    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
}

fn pwl_slope(knots: &[[f64; 2]], t: f64) -> f64 {
    if knots.len() < 2 || t < knots[0][0] || t >= knots[knots.len() - 1][0] {
        return 0.0;
    }
    let i = knots.partition_point(|k| k[0] <= t) - 1;
    let (a, b) = (knots[i], knots[i + 1]);
    (b[1] - a[1]) / (b[0] - a[0])
}

fn pwl_range(knots: &[[f64; 2]], t: Interval) -> Interval {
    let mut r = Interval::point(pwl_eval(knots, t.lo)).hull(Interval::point(pwl_eval(knots, t.hi)));
    for k in knots {
        if t.contains(k[0]) {
            r = r.hull(Interval::point(k[1]));
        }
    }
    // Cover rounding in the interpolation.
    let pad = 4.0 * f64::EPSILON * r.mag();
    Interval::new(r.lo - pad, r.hi + pad)
}

fn pwl_slope_range(knots: &[[f64; 2]], t: Interval) -> Interval {
    let mut r: Option<Interval> = None;
    let mut add = |s: f64| {
        let p = Interval::point(s);
        r = Some(r.map_or(p, |q| q.hull(p)));
    };
    if t.lo < knots[0][0] || t.hi >= knots[knots.len() - 1][0] {
        add(0.0);
    }
    for w in knots.windows(2) {
        if t.hi >= w[0][0] && t.lo <= w[1][0] {
            add((w[1][1] - w[0][1]) / (w[1][0] - w[0][0]));
        }
    }
    let r = r.unwrap_or(Interval::point(0.0));
    let pad = 4.0 * f64::EPSILON * r.mag();
    Interval::new(r.lo - pad, r.hi + pad)
}
