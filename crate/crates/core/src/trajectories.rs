//! Carathéodory solutions by Picard iteration, and sample-and-hold runs.
//!
//! State norms are sup-norms throughout; Lipschitz constants in `x` refer
//! to that norm.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{positive, Error, Result};
use crate::mesh::Hypercube;
use crate::modulus::Modulus;
use crate::real::CertifiedReal;
use crate::selector::{Block, GeneralizedBlock, RepresentableDomain};

const U: f64 = f64::EPSILON / 2.0;
pub const DEFAULT_NODE_BUDGET: usize = 1 << 24;
const MAX_SWEEPS: usize = 200;

pub type RhsFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;
pub type ControlRhsFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type FeedbackFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

fn exp_up(x: f64) -> f64 {
    (x.exp() * (1.0 + 4.0 * U)).next_up()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `α(x, t)` on one time block.
#[derive(Clone)]
pub struct RhsPiece {
    pub f: RhsFn,
    pub lipschitz_x: f64,
    pub time_modulus: Modulus,
}

impl RhsPiece {
    pub fn new(f: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static, lipschitz_x: f64, time_modulus: Modulus) -> Self {
        Self { f: Arc::new(f), lipschitz_x, time_modulus }
    }

    /// A right-hand side that does not depend on `t`.
    pub fn autonomous(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static, lipschitz_x: f64) -> Self {
        Self::new(move |x, _, out| f(x, out), lipschitz_x, Modulus::lipschitz(0.0))
    }
}

/// Right-hand side that is continuous on each block
/// `[breakpoints[i], breakpoints[i+1]]`.
#[derive(Clone)]
pub struct RegularRHS {
    pub dim: usize,
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<RhsPiece>,
    pub state_box: Hypercube,
}

impl RegularRHS {
    pub fn new(dim: usize, breakpoints: Vec<f64>, pieces: Vec<RhsPiece>, state_box: Hypercube) -> Result<Self> {
        if dim == 0 || state_box.dim() != dim {
            return Err(Error::Argument("state box dimension must match the state".into()));
        }
        if breakpoints.len() != pieces.len() + 1 || pieces.is_empty() {
            return Err(Error::Argument("need one piece per time block".into()));
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) || !breakpoints.iter().all(|t| t.is_finite()) {
            return Err(Error::Argument("breakpoints must start at 0 and increase strictly".into()));
        }
        if pieces.iter().any(|p| !(p.lipschitz_x >= 0.0 && p.lipschitz_x.is_finite())) {
            return Err(Error::Argument("Lipschitz constants must be finite and non-negative".into()));
        }
        Ok(Self { dim, breakpoints, pieces, state_box })
    }

    pub fn single(dim: usize, piece: RhsPiece, horizon: f64, state_box: Hypercube) -> Result<Self> {
        Self::new(dim, vec![0.0, horizon], vec![piece], state_box)
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("at least two breakpoints")
    }

    pub fn lipschitz(&self) -> f64 {
        self.pieces.iter().map(|p| p.lipschitz_x).fold(0.0, f64::max)
    }

    /// Samples pairs in the state box per block and reports the first pair
    /// whose difference quotient exceeds the declared constant.
    pub fn check_lipschitz(&self, pairs: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut fa, mut fb) = (vec![0.0; self.dim], vec![0.0; self.dim]);
        for (i, p) in self.pieces.iter().enumerate() {
            let (t0, t1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            for _ in 0..pairs {
                let t = rng.gen_range(t0..=t1);
                let a = self.state_box.sample(&mut rng);
                let b = self.state_box.sample(&mut rng);
                (p.f)(&a, t, &mut fa);
                (p.f)(&b, t, &mut fb);
                let d: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
                let dx: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                if sup_norm(&d) > p.lipschitz_x * sup_norm(&dx) * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Contract(format!("block {i} is not {}-Lipschitz at {a:?}, {b:?}", p.lipschitz_x)));
                }
            }
        }
        Ok(())
    }
}

/// Grid values of an approximate solution with a sup-norm error bound.
#[derive(Debug, Clone)]
pub struct ExtendedSolution {
    pub dim: usize,
    pub grid: Vec<f64>,
    /// Row-major, `dim` values per node.
    pub values: Vec<f64>,
    /// Error bound in force on each node's window.
    pub node_error: Vec<f64>,
    pub error_bound: CertifiedReal,
    /// Time blocks on whose interiors the equation holds.
    pub validity: RepresentableDomain,
    /// Largest observed ratio between consecutive Picard corrections.
    pub contraction: f64,
    pub control_dim: usize,
    /// Held control per node, `control_dim` values each.
    pub controls: Vec<f64>,
}

impl ExtendedSolution {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Piecewise-linear interpolant of the grid values.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let k = self.grid.partition_point(|&s| s <= t).clamp(1, self.len() - 1);
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        self.state(k - 1).iter().zip(self.state(k)).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// Neighborhoods of the block boundaries with total length ≤ `budget`.
    pub fn exception(&self, budget: f64) -> Result<GeneralizedBlock> {
        self.validity.exception(budget)
    }

    /// `t, x1.., [u1..,] error_bound`, every `stride`-th node plus the last.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut s = String::from("t");
        for i in 1..=self.dim {
            let _ = write!(s, ",x{i}");
        }
        for i in 1..=self.control_dim {
            let _ = write!(s, ",u{i}");
        }
        s.push_str(",error_bound\n");
        let last = self.len() - 1;
        for k in (0..self.len()).filter(|k| k % stride == 0 || *k == last) {
            let _ = write!(s, "{:?}", self.grid[k]);
            for v in self.state(k) {
                let _ = write!(s, ",{v:?}");
            }
            for v in &self.controls[k * self.control_dim..(k + 1) * self.control_dim] {
                let _ = write!(s, ",{v:?}");
            }
            let _ = writeln!(s, ",{:?}", self.node_error[k]);
        }
        s
    }
}

struct Integrator<'a> {
    dim: usize,
    eps: f64,
    end: f64,
    lipschitz: f64,
    budget: usize,
    state_box: &'a Hypercube,
    err: f64,
    out: ExtendedSolution,
}

struct Segment {
    values: Vec<f64>,
    defect: f64,
    ratio: f64,
}

impl<'a> Integrator<'a> {
    fn new(x0: &[f64], state_box: &'a Hypercube, eps: f64, end: f64, lipschitz: f64, control_dim: usize) -> Result<Self> {
        positive("solver accuracy", eps)?;
        positive("horizon", end)?;
        if x0.len() != state_box.dim() {
            return Err(Error::Argument("initial state has the wrong dimension".into()));
        }
        if !state_box.contains(x0) {
            return Err(Error::Argument(format!("initial state {x0:?} lies outside the state box")));
        }
        let dim = x0.len();
        let validity = RepresentableDomain { base: Vec::new(), clip: Block::interval(0.0, end)? };
        Ok(Self {
            dim,
            eps,
            end,
            lipschitz,
            budget: DEFAULT_NODE_BUDGET,
            state_box,
            err: 0.0,
            out: ExtendedSolution {
                dim,
                grid: vec![0.0],
                values: x0.to_vec(),
                node_error: vec![0.0],
                error_bound: CertifiedReal::exact(0.0),
                validity,
                contraction: 0.0,
                control_dim,
                controls: vec![0.0; control_dim],
            },
        })
    }

    fn current(&self) -> (f64, Vec<f64>) {
        (*self.out.grid.last().expect("grid starts non-empty"), self.out.endpoint().to_vec())
    }

    /// Integrates one continuity block `[a, b]` in contraction windows.
    fn block(&mut self, f: &dyn Fn(&[f64], f64, &mut [f64]), l: f64, tm: &Modulus, b: f64, control: &[f64]) -> Result<()> {
        let (a, _) = self.current();
        self.out.validity.base.push(Block::interval(a, b)?);
        if self.out.controls.len() == self.control_dim() {
            self.out.controls.copy_from_slice(control);
        }
        // Equal windows of length at most 1/(2L), so no sliver is left whose
        // error share falls below rounding.
        let windows = if l > 0.0 { ((b - a) * 2.0 * l).ceil().max(1.0) as usize } else { 1 };
        let mut t = a;
        for j in 1..=windows {
            let w_end = if j == windows { b } else { a + (b - a) * j as f64 / windows as f64 };
            let (_, x) = self.current();
            let len = w_end - t;
            let target = self.eps * len / (2.0 * self.end) * (-self.lipschitz * (self.end - w_end)).exp() * (1.0 - 1e-9);
            let seg = self.segment(f, l, tm, t, w_end, &x, target)?;
            self.err = exp_up(l * len) * self.err + 2.0 * seg.defect;
            self.err = self.err.next_up();
            self.out.contraction = self.out.contraction.max(seg.ratio);
            let m = seg.values.len() / self.dim - 1;
            for k in 1..=m {
                self.out.grid.push(if k == m { w_end } else { t + len * k as f64 / m as f64 });
                self.out.values.extend_from_slice(&seg.values[k * self.dim..(k + 1) * self.dim]);
                self.out.node_error.push(self.err);
                self.out.controls.extend_from_slice(control);
            }
            t = w_end;
        }
        Ok(())
    }

    fn control_dim(&self) -> usize {
        self.out.control_dim
    }

    #[allow(clippy::too_many_arguments)]
    fn segment(
        &self,
        f: &dyn Fn(&[f64], f64, &mut [f64]),
        l: f64,
        tm: &Modulus,
        a: f64,
        b: f64,
        x: &[f64],
        target: f64,
    ) -> Result<Segment> {
        let n = self.dim;
        let len = b - a;
        let mut g = vec![0.0; n];
        f(x, a, &mut g);
        let rate = sup_norm(&g) + 1.0;
        let by_state = len * len * l * rate / target;
        let by_time = match tm.global_step(target / (2.0 * len)) {
            Ok(step) if step.is_finite() => len / (2.0 * step),
            _ => 0.0,
        };
        let mut m = by_state.max(by_time).ceil().clamp(4.0, self.budget as f64) as usize;
        let used = self.out.grid.len();
        loop {
            if used + m > self.budget {
                return Err(Error::Budget { what: "trajectory grid nodes", required: (used + m) as u128, budget: self.budget as u128 });
            }
            let seg = self.sweep(f, l, tm, a, b, x, m)?;
            if seg.defect <= target {
                return Ok(seg);
            }
            let grow = (seg.defect / target).ceil().clamp(2.0, 64.0) as usize;
            m *= grow;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn sweep(&self, f: &dyn Fn(&[f64], f64, &mut [f64]), l: f64, tm: &Modulus, a: f64, b: f64, x: &[f64], m: usize) -> Result<Segment> {
        let n = self.dim;
        let h = (b - a) / m as f64;
        let node_t = |k: usize| if k == m { b } else { a + (b - a) * k as f64 / m as f64 };
        let mid_t = |k: usize| a + (b - a) * (k as f64 + 0.5) / m as f64;
        let mut g = vec![0.0; n];
        let mut mid = vec![0.0; n];

        // Euler predictor, then Picard sweeps x_{j+1} = x0 + Σ h α(mid x_j).
        let mut y = vec![0.0; (m + 1) * n];
        y[..n].copy_from_slice(x);
        for k in 0..m {
            f(&y[k * n..(k + 1) * n], node_t(k), &mut g);
            for i in 0..n {
                y[(k + 1) * n + i] = y[k * n + i] + h * g[i];
            }
        }
        let mut next = y.clone();
        let floor = 64.0 * U * (1.0 + sup_norm(&y)) * (m as f64).sqrt();
        let mut prev_diff = f64::INFINITY;
        let mut ratio: f64 = 0.0;
        for _ in 0..MAX_SWEEPS {
            let mut acc = x.to_vec();
            for k in 0..m {
                for i in 0..n {
                    mid[i] = 0.5 * (y[k * n + i] + y[(k + 1) * n + i]);
                }
                f(&mid, mid_t(k), &mut g);
                for i in 0..n {
                    acc[i] += h * g[i];
                    next[(k + 1) * n + i] = acc[i];
                }
            }
            let diff = y.iter().zip(&next).fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
            std::mem::swap(&mut y, &mut next);
            if prev_diff.is_finite() && prev_diff > floor && diff > floor {
                ratio = ratio.max(diff / prev_diff);
            }
            if diff <= floor {
                break;
            }
            prev_diff = diff;
        }

        for k in 0..=m {
            if !self.state_box.contains(&y[k * n..(k + 1) * n]) {
                if k == 0 {
                    return Err(Error::DomainExit { time: a });
                }
                // Where the linear iterate crosses the boundary on the last segment.
                let (p, q) = (&y[(k - 1) * n..k * n], &y[k * n..(k + 1) * n]);
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let s = 0.5 * (lo + hi);
                    let z: Vec<f64> = p.iter().zip(q).map(|(u, v)| u + s * (v - u)).collect();
                    if self.state_box.contains(&z) {
                        lo = s;
                    } else {
                        hi = s;
                    }
                }
                return Err(Error::DomainExit { time: node_t(k - 1) + hi * h });
            }
        }

        // Defect sup |y − P y| from the midpoint rule with a certified remainder.
        let tv = tm.global_variation(h / 2.0);
        let mut acc = x.to_vec();
        let mut carried: f64 = 0.0;
        let mut rounding = 0.0;
        let mut defect: f64 = 0.0;
        let mut slope = vec![0.0; n];
        for k in 0..m {
            let (yk, yk1) = (&y[k * n..(k + 1) * n], &y[(k + 1) * n..(k + 2) * n]);
            let at_node = yk.iter().zip(&acc).fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
            for i in 0..n {
                mid[i] = 0.5 * (yk[i] + yk1[i]);
                slope[i] = (yk1[i] - yk[i]) / h;
            }
            f(&mid, mid_t(k), &mut g);
            let jump = yk.iter().zip(yk1).fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
            let mismatch = g.iter().zip(&slope).fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
            let rem = h * (l * jump / 2.0 + tv);
            defect = defect.max(at_node + carried + h * mismatch + rem);
            carried += rem;
            let step = h * sup_norm(&g);
            if step > 0.0 {
                for i in 0..n {
                    acc[i] += h * g[i];
                }
                rounding += 2.0 * U * (sup_norm(&acc) + step);
            }
        }
        let tail = y[m * n..].iter().zip(&acc).fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
        defect = defect.max(tail + carried);
        // Rounding in the running sums and in the node arithmetic.
        defect += rounding + 8.0 * U * sup_norm(&y);
        Ok(Segment { values: y, defect: defect.next_up(), ratio })
    }

    fn finish(mut self) -> Result<ExtendedSolution> {
        self.out.error_bound = CertifiedReal::new(self.err, 0.0)?;
        Ok(self.out)
    }
}

/// Picard iteration on windows with `L_x·Δ ≤ 1/2`, refining each window's
/// grid until the certified defect meets its share of `eps`.
///
/// A window with defect `D` moves the sup-error from `e` to
/// `e^{LΔ}·e + 2D`; shares are weighted so the final bound is at most
/// `eps`.
pub fn picard_solve(rhs: &RegularRHS, x0: &[f64], horizon: f64, eps: f64) -> Result<ExtendedSolution> {
    picard_solve_with_budget(rhs, x0, horizon, eps, DEFAULT_NODE_BUDGET)
}

pub fn picard_solve_with_budget(rhs: &RegularRHS, x0: &[f64], horizon: f64, eps: f64, budget: usize) -> Result<ExtendedSolution> {
    if !(horizon <= rhs.horizon()) {
        return Err(Error::Argument(format!("horizon {horizon} exceeds the right-hand side's {}", rhs.horizon())));
    }
    let mut it = Integrator::new(x0, &rhs.state_box, eps, horizon, rhs.lipschitz(), 0)?;
    it.budget = budget;
    for (i, p) in rhs.pieces.iter().enumerate() {
        let t0 = rhs.breakpoints[i];
        if t0 >= horizon {
            break;
        }
        let t1 = rhs.breakpoints[i + 1].min(horizon);
        let f = p.f.clone();
        it.block(&*f, p.lipschitz_x, &p.time_modulus, t1, &[])?;
    }
    it.finish()
}

/// Grönwall: solutions from `x0` and `x0'` stay within
/// `e^{L_x T}·‖x0 − x0'‖` on `[0, T]`.
pub fn dependence_modulus(rhs: &RegularRHS, horizon: f64) -> Modulus {
    let k = exp_up(rhs.lipschitz() * horizon);
    Modulus::mu(move |t| (k * t * (1.0 + 2.0 * U)).next_up())
}

/// `ẋ = f(x, u)` with `u` held between samples.
#[derive(Clone)]
pub struct ControlSystem {
    pub dim: usize,
    pub control_dim: usize,
    pub f: ControlRhsFn,
    /// Lipschitz constant in `x`, uniform over admissible controls.
    pub lipschitz_x: f64,
    pub state_box: Hypercube,
}

impl ControlSystem {
    pub fn new(
        dim: usize,
        control_dim: usize,
        f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        lipschitz_x: f64,
        state_box: Hypercube,
    ) -> Result<Self> {
        if state_box.dim() != dim {
            return Err(Error::Argument("state box dimension must match the state".into()));
        }
        if !(lipschitz_x >= 0.0 && lipschitz_x.is_finite()) {
            return Err(Error::Argument("Lipschitz constant must be finite and non-negative".into()));
        }
        Ok(Self { dim, control_dim, f: Arc::new(f), lipschitz_x, state_box })
    }
}

/// `κ^η(x(t)) = κ(x(kη))` on `[kη, (k+1)η)`.
#[derive(Clone)]
pub struct SampleHoldPolicy {
    pub policy: FeedbackFn,
    pub eta: f64,
}

impl SampleHoldPolicy {
    pub fn new(policy: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static, eta: f64) -> Result<Self> {
        positive("sampling period", eta)?;
        Ok(Self { policy: Arc::new(policy), eta })
    }
}

/// Chains Picard solves over the sampling intervals with the control
/// frozen at the computed sampled state.
pub fn sample_hold_trajectory(
    sys: &ControlSystem,
    policy: &SampleHoldPolicy,
    x0: &[f64],
    horizon: f64,
    eps: f64,
) -> Result<ExtendedSolution> {
    let mut it = Integrator::new(x0, &sys.state_box, eps, horizon, sys.lipschitz_x, sys.control_dim)?;
    let mut k = 0u64;
    loop {
        let (t, x) = it.current();
        if t >= horizon {
            break;
        }
        let u = (policy.policy)(&x);
        if u.len() != sys.control_dim {
            return Err(Error::Argument(format!("policy returned {} controls, expected {}", u.len(), sys.control_dim)));
        }
        let t1 = ((k + 1) as f64 * policy.eta).min(horizon);
        let f = sys.f.clone();
        let held = u.clone();
        let rhs = move |x: &[f64], _t: f64, out: &mut [f64]| f(x, &held, out);
        it.block(&rhs, sys.lipschitz_x, &Modulus::lipschitz(0.0), t1, &u)?;
        k += 1;
    }
    it.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_box() -> Hypercube {
        Hypercube::new(vec![0.0], 4.0).unwrap()
    }

    #[test]
    fn constant_field_is_exact() {
        let rhs = RegularRHS::single(1, RhsPiece::autonomous(|_, o| o[0] = 0.0, 0.0), 3.0, line_box()).unwrap();
        let s = picard_solve(&rhs, &[0.5], 3.0, 1e-6).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.5));
        assert!(s.error_bound.value <= 1e-6);
    }

    #[test]
    fn leaving_the_box_is_reported() {
        let rhs = RegularRHS::single(1, RhsPiece::autonomous(|_, o| o[0] = 1.0, 0.0), 5.0, line_box()).unwrap();
        match picard_solve(&rhs, &[0.0], 5.0, 1e-3) {
            Err(Error::DomainExit { time }) => assert!(time > 1.9 && time < 2.2, "{time}"),
            other => panic!("{other:?}"),
        }
    }
}
