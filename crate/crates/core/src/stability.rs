//! Lyapunov certificate checking on meshes, CLF-based feedback and
//! sampling-time search for sample-and-hold stabilization.
//!
//! All checks work on a mesh of the state box and transfer to the whole box
//! (outside a small excluded ball around the origin) by adding the
//! variation of every function over one mesh cell. A check certifies only
//! with a strictly positive margin; a negative raw value larger than its
//! evaluation radius is a counterexample; anything else is undecided.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{positive, Error, Result};
use crate::forms::FnForm;
use crate::func::ScalarFn;
use crate::mesh::{build_mesh, norm, FiniteMesh, Hypercube};
use crate::modulus::product_up;
use crate::real::CertifiedReal;
use crate::trajectories::{sample_hold_trajectory, ControlSystem, SampleHoldPolicy};

pub const DEFAULT_MESH_BUDGET: u128 = 1 << 22;
/// Excluded inner radius in units of the mesh resolution.
pub const DEFAULT_INNER_FACTOR: f64 = 32.0;
/// Linear-growth pairs closer than this many mesh resolutions in norm are
/// skipped.
pub const GROWTH_GAP_FACTOR: f64 = 16.0;

const U: f64 = f64::EPSILON;

pub type TimeEval = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// `(center, radius) ↦` bound on the variation over the ball.
pub type VariationFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type WitnessFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A function of `(x, t)` with optional continuity data in each argument.
#[derive(Clone)]
pub struct TimeFn {
    eval: TimeEval,
    space: Option<VariationFn>,
    /// `(lo, hi)` box corners ↦ Lipschitz bound in `t`, uniform over the box.
    time: Option<Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeFn")
            .field("space", &self.space.is_some())
            .field("time", &self.time.is_some())
            .finish()
    }
}

impl TimeFn {
    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f), space: None, time: None }
    }

    /// A time-independent function; both moduli come from `f`.
    pub fn autonomous(f: ScalarFn) -> Self {
        let g = f.clone();
        Self {
            eval: Arc::new(move |x, _| f.eval(x)),
            space: Some(Arc::new(move |c, r| g.variation_near(c, r))),
            time: Some(Arc::new(|_, _| 0.0)),
        }
    }

    /// Lipschitz bound in `x` on boxes, valid for every `t`.
    pub fn with_space_lipschitz(mut self, bound: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.space = Some(Arc::new(move |c: &[f64], r: f64| {
            let lo: Vec<f64> = c.iter().map(|v| v - r).collect();
            let hi: Vec<f64> = c.iter().map(|v| v + r).collect();
            product_up(bound(&lo, &hi), r)
        }));
        self
    }

    pub fn with_time_lipschitz(mut self, bound: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.time = Some(Arc::new(bound));
        self
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    fn space_variation(&self, c: &[f64], r: f64, name: &str) -> Result<f64> {
        let space = self
            .space
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{name} has no modulus in x")))?;
        Ok(space(c, r))
    }

    fn time_variation(&self, c: &[f64], r: f64, gap: f64, name: &str) -> Result<f64> {
        if gap == 0.0 {
            return Ok(0.0);
        }
        let time = self
            .time
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{name} has no modulus in t")))?;
        let lo: Vec<f64> = c.iter().map(|v| v - r).collect();
        let hi: Vec<f64> = c.iter().map(|v| v + r).collect();
        Ok(product_up(time(&lo, &hi), gap))
    }
}

/// Realizes "strictly increasing in norm": `‖x‖ < ‖y‖ ⟹ w(y) − w(x) > ν(x, y) > 0`.
#[derive(Clone)]
pub struct StrictIncreaseWitness {
    pub nu: WitnessFn,
}

impl std::fmt::Debug for StrictIncreaseWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("StrictIncreaseWitness")
    }
}

impl StrictIncreaseWitness {
    pub fn new(nu: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { nu: Arc::new(nu) }
    }

    /// Witness for `w(x) = Σ a_k ‖x‖^k` with `a_k ≥ 0` and some `a_k > 0`
    /// for `k ≥ 1`: half of the exact increase.
    pub fn radial_polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|a| !(*a >= 0.0)) || !coeffs.iter().skip(1).any(|a| *a > 0.0) {
            return Err(Error::Argument("radial polynomial needs non-negative coefficients, one of positive degree".into()));
        }
        Ok(Self::new(move |x, y| {
            let (nx, ny) = (norm(x), norm(y));
            0.5 * coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, a)| a * (ny.powi(k as i32) - nx.powi(k as i32)))
                .sum::<f64>()
        }))
    }

    /// Default witness for forms that are non-negative polynomials of the
    /// norm: `scale·‖x‖`, `p(scale·‖x‖)`, or in one dimension a polynomial
    /// in `x` with only even powers.
    pub fn from_form(form: &FnForm, dim: usize) -> Option<Self> {
        let coeffs = match form {
            FnForm::Norm { scale, vars } if vars.len() == dim => vec![0.0, scale.abs()],
            FnForm::Compose { outer, inner } => match (outer.as_ref(), inner.as_ref()) {
                (FnForm::Polynomial { var: 0, coeffs }, FnForm::Norm { scale, vars }) if vars.len() == dim => {
                    coeffs.iter().enumerate().map(|(k, c)| c * scale.abs().powi(k as i32)).collect()
                }
                _ => return None,
            },
            FnForm::Polynomial { var: 0, coeffs } if dim == 1 => {
                if coeffs.iter().enumerate().any(|(k, c)| k % 2 == 1 && *c != 0.0) {
                    return None;
                }
                coeffs.clone()
            }
            _ => return None,
        };
        Self::radial_polynomial(coeffs).ok()
    }

    /// Sampled check against `w` over all pairs of `points`.
    pub fn check(&self, w: &ScalarFn, points: &[Vec<f64>]) -> Result<()> {
        for x in points {
            for y in points {
                if !(norm(x) < norm(y)) {
                    continue;
                }
                let nu = (self.nu)(x, y);
                let inc = w.eval(y) - w.eval(x);
                if !(nu > 0.0) || !(inc > nu) {
                    return Err(Error::Contract(format!(
                        "strict-increase witness fails at x = {x:?}, y = {y:?}: nu = {nu}, increase = {inc}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `V`, its derivative along the system, the comparison functions, their
/// witnesses and the growth constant `ξ`.
#[derive(Debug, Clone)]
pub struct LyapunovData {
    pub state_box: Hypercube,
    pub v: TimeFn,
    pub vdot: TimeFn,
    pub w1: ScalarFn,
    pub w2: ScalarFn,
    pub w3: ScalarFn,
    pub nu: [StrictIncreaseWitness; 3],
    pub xi: f64,
}

impl LyapunovData {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_box: Hypercube,
        v: TimeFn,
        vdot: TimeFn,
        w1: ScalarFn,
        w2: ScalarFn,
        w3: ScalarFn,
        nu: [StrictIncreaseWitness; 3],
        xi: f64,
    ) -> Result<Self> {
        positive("xi", xi)?;
        if !state_box.contains(&vec![0.0; state_box.dim()]) {
            return Err(Error::Argument("state box must contain the origin".into()));
        }
        Ok(Self { state_box, v, vdot, w1, w2, w3, nu, xi })
    }

    pub fn dim(&self) -> usize {
        self.state_box.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub mesh_eps: f64,
    /// Checks cover `t` in `[min, max]` of these samples.
    pub t_samples: Vec<f64>,
    /// Nodes with norm below this are not checked.
    pub inner_radius: f64,
    pub budget: u128,
}

impl CheckConfig {
    pub fn new(mesh_eps: f64, t_samples: Vec<f64>) -> Self {
        Self { mesh_eps, t_samples, inner_radius: DEFAULT_INNER_FACTOR * mesh_eps, budget: DEFAULT_MESH_BUDGET }
    }

    pub fn autonomous(mesh_eps: f64) -> Self {
        Self::new(mesh_eps, vec![0.0])
    }

    pub fn with_inner_radius(mut self, r: f64) -> Self {
        self.inner_radius = r;
        self
    }

    fn validate(&self, cube: &Hypercube) -> Result<(Vec<f64>, f64)> {
        positive("mesh resolution", self.mesh_eps)?;
        if !(self.inner_radius >= 0.0) {
            return Err(Error::Argument("inner radius must be non-negative".into()));
        }
        if self.inner_radius >= cube.inscribed_radius_at_origin() {
            return Err(Error::Argument(format!(
                "inner radius {} leaves nothing to check in the state box",
                self.inner_radius
            )));
        }
        if self.t_samples.is_empty() || self.t_samples.iter().any(|t| !t.is_finite()) {
            return Err(Error::Argument("need at least one finite time sample".into()));
        }
        let mut ts = self.t_samples.clone();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let gap = ts.windows(2).map(|w| (w[1] - w[0]) / 2.0).fold(0.0, f64::max);
        Ok((ts, gap))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    LowerSandwich,
    UpperSandwich,
    Decay,
    LinearGrowth,
}

/// A mesh point (and partner for pair conditions) where a condition fails
/// by more than the evaluation radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub point: Vec<f64>,
    pub partner: Option<Vec<f64>>,
    pub t: f64,
    /// How far the inequality fails at the point.
    pub violation: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckOutcome {
    Certified { margin: f64 },
    Counterexample(Violation),
    Undecided { margin: f64, point: Vec<f64>, suggested_eps: f64 },
}

impl CheckOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CheckOutcome::Certified { .. })
    }

    pub fn counterexample(&self) -> Option<&Violation> {
        match self {
            CheckOutcome::Counterexample(v) => Some(v),
            _ => None,
        }
    }
}

/// Per-node result: slack-adjusted margin, raw margin, evaluation radius.
#[derive(Debug, Clone, Copy)]
struct NodeMargin {
    margin: f64,
    raw: f64,
    radius: f64,
}

fn eval_radius(a: f64, b: f64) -> f64 {
    8.0 * U * (a.abs() + b.abs()) + f64::MIN_POSITIVE
}

struct Scan {
    condition: Condition,
    point: Vec<f64>,
    partner: Option<Vec<f64>>,
    t: f64,
    m: NodeMargin,
}

fn summarize(scans: Vec<Scan>, eps: f64) -> Result<CheckOutcome> {
    if scans.is_empty() {
        return Err(Error::Argument("no mesh nodes outside the inner ball".into()));
    }
    if let Some(s) = scans
        .iter()
        .filter(|s| -s.m.raw > s.m.radius)
        .max_by(|a, b| (-a.m.raw - a.m.radius).total_cmp(&(-b.m.raw - b.m.radius)))
    {
        return Ok(CheckOutcome::Counterexample(Violation {
            condition: s.condition,
            point: s.point.clone(),
            partner: s.partner.clone(),
            t: s.t,
            violation: -s.m.raw,
            radius: s.m.radius,
        }));
    }
    let worst = scans.iter().min_by(|a, b| a.m.margin.total_cmp(&b.m.margin)).expect("non-empty");
    if worst.m.margin > 0.0 {
        return Ok(CheckOutcome::Certified { margin: worst.m.margin });
    }
    // Slack grows linearly in the resolution; aim for half the raw margin.
    let slack = worst.m.raw - worst.m.margin;
    let suggested = if worst.m.raw > 0.0 && slack > 0.0 {
        (eps * worst.m.raw / (2.0 * slack)).min(eps / 2.0)
    } else {
        eps / 4.0
    };
    Ok(CheckOutcome::Undecided { margin: worst.m.margin, point: worst.point.clone(), suggested_eps: suggested })
}

fn outer_nodes(mesh: &FiniteMesh, inner: f64) -> Vec<Vec<f64>> {
    mesh.points().filter(|p| norm(p) >= inner).map(|p| p.to_vec()).collect()
}

/// `w1(x) ≤ V(x, t) ≤ w2(x)` on the mesh with inter-node slack.
pub fn check_sandwich(data: &LyapunovData, config: &CheckConfig) -> Result<CheckOutcome> {
    let (ts, gap) = config.validate(&data.state_box)?;
    let mesh = build_mesh(&data.state_box, config.mesh_eps, config.budget)?;
    let h = mesh.resolution;
    let nodes = outer_nodes(&mesh, config.inner_radius);
    let scans: Vec<Vec<Scan>> = nodes
        .par_iter()
        .map(|x| {
            let dv = data.v.space_variation(x, h, "V")?;
            let dt = data.v.time_variation(x, h, gap, "V")?;
            let (w1, w2) = (data.w1.eval(x), data.w2.eval(x));
            let (d1, d2) = (data.w1.variation_near(x, h), data.w2.variation_near(x, h));
            let mut out = Vec::with_capacity(2 * ts.len());
            for &t in &ts {
                let v = data.v.eval(x, t);
                let lower = v - w1;
                let upper = w2 - v;
                out.push(Scan {
                    condition: Condition::LowerSandwich,
                    point: x.clone(),
                    partner: None,
                    t,
                    m: NodeMargin { margin: lower - dv - dt - d1 - eval_radius(v, w1), raw: lower, radius: eval_radius(v, w1) },
                });
                out.push(Scan {
                    condition: Condition::UpperSandwich,
                    point: x.clone(),
                    partner: None,
                    t,
                    m: NodeMargin { margin: upper - dv - dt - d2 - eval_radius(v, w2), raw: upper, radius: eval_radius(v, w2) },
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    summarize(scans.into_iter().flatten().collect(), config.mesh_eps)
}

/// `V̇(x, t) ≤ −w3(x)` on the mesh with inter-node slack.
pub fn check_decay(data: &LyapunovData, config: &CheckConfig) -> Result<CheckOutcome> {
    let (ts, gap) = config.validate(&data.state_box)?;
    let mesh = build_mesh(&data.state_box, config.mesh_eps, config.budget)?;
    let h = mesh.resolution;
    let nodes = outer_nodes(&mesh, config.inner_radius);
    let scans: Vec<Vec<Scan>> = nodes
        .par_iter()
        .map(|x| {
            let dv = data.vdot.space_variation(x, h, "Vdot")?;
            let dt = data.vdot.time_variation(x, h, gap, "Vdot")?;
            let w3 = data.w3.eval(x);
            let d3 = data.w3.variation_near(x, h);
            Ok(ts
                .iter()
                .map(|&t| {
                    let vd = data.vdot.eval(x, t);
                    let raw = -w3 - vd;
                    let radius = eval_radius(vd, w3);
                    Scan {
                        condition: Condition::Decay,
                        point: x.clone(),
                        partner: None,
                        t,
                        m: NodeMargin { margin: raw - dv - dt - d3 - radius, raw, radius },
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    summarize(scans.into_iter().flatten().collect(), config.mesh_eps)
}

/// `w2(x) − w2(y) ≥ ξ(‖x‖ − ‖y‖)` for mesh pairs with `‖x‖ ≥ ‖y‖`.
///
/// The margin is the slack-adjusted difference quotient minus `ξ`. Pairs
/// whose norms differ by less than `GROWTH_GAP_FACTOR·ε` only enter the
/// counterexample search, since their quotient cannot be resolved at this
/// mesh.
pub fn check_linear_growth(w2: &ScalarFn, xi: f64, state_box: &Hypercube, config: &CheckConfig) -> Result<CheckOutcome> {
    positive("xi", xi)?;
    positive("mesh resolution", config.mesh_eps)?;
    let mesh = build_mesh(state_box, config.mesh_eps, config.budget)?;
    let h = mesh.resolution;
    let min_gap = GROWTH_GAP_FACTOR * h;
    let mut nodes: Vec<(f64, f64, f64, Vec<f64>)> = mesh
        .points()
        .map(|p| (norm(p), w2.eval(p), w2.variation_near(p, h), p.to_vec()))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scans: Vec<Scan> = (0..nodes.len())
        .into_par_iter()
        .filter_map(|i| {
            let (nx, wx, dx, x) = &nodes[i];
            let mut best: Option<Scan> = None;
            let mut keep = |s: Scan| {
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        let cex = |s: &Scan| -s.m.raw > s.m.radius;
                        match (cex(&s), cex(b)) {
                            (true, false) => true,
                            (false, true) => false,
                            (true, true) => -s.m.raw > -b.m.raw,
                            (false, false) => s.m.margin < b.m.margin,
                        }
                    }
                };
                if replace {
                    best = Some(s);
                }
            };
            for (ny, wy, dy, y) in nodes[..i].iter() {
                let d = nx - ny;
                if d <= 0.0 {
                    continue;
                }
                let diff = wx - wy;
                let raw = diff - xi * d;
                let radius = eval_radius(*wx, *wy) + 4.0 * U * xi * (nx + ny);
                let margin = if d >= min_gap {
                    (diff - dx - dy - radius) / (d + 2.0 * h) - xi
                } else {
                    f64::INFINITY
                };
                keep(Scan {
                    condition: Condition::LinearGrowth,
                    point: x.clone(),
                    partner: Some(y.clone()),
                    t: 0.0,
                    m: NodeMargin { margin, raw, radius },
                });
            }
            best
        })
        .collect();
    if scans.is_empty() {
        return Err(Error::Argument("mesh has no pairs with distinct norms".into()));
    }
    if scans.iter().all(|s| s.m.margin == f64::INFINITY) && !scans.iter().any(|s| -s.m.raw > s.m.radius) {
        return Ok(CheckOutcome::Undecided {
            margin: f64::NEG_INFINITY,
            point: scans[0].point.clone(),
            suggested_eps: config.mesh_eps / 4.0,
        });
    }
    summarize(scans, config.mesh_eps)
}

/// Sublevel set `{x : w2(x) ≤ threshold}` with `threshold ≤ min_{‖y‖=ρ} w1(y)`,
/// and a radius `r` with `B_r ⊆` the set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelSet {
    pub threshold: f64,
    pub sphere_radius: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVerdict {
    Certified,
    Counterexample,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub verdict: CertificateVerdict,
    pub region: Option<SublevelSet>,
    pub mesh_eps: f64,
    pub inner_radius: f64,
    pub t_range: (f64, f64),
    pub sandwich: CheckOutcome,
    pub decay: CheckOutcome,
    pub growth: CheckOutcome,
    pub counterexample: Option<Violation>,
    pub suggested_eps: Option<f64>,
}

fn check_positive_definite(name: &str, w: &ScalarFn, mesh: &FiniteMesh) -> Result<()> {
    let zero = vec![0.0; mesh.dim()];
    let w0 = w.eval(&zero);
    if w0.abs() > 1e-12 {
        return Err(Error::Contract(format!("{name}(0) = {w0}, expected 0")));
    }
    for p in mesh.points() {
        if norm(p) > 0.0 && !(w.eval(p) > 0.0) {
            return Err(Error::Contract(format!("{name} is not positive at {p:?}")));
        }
    }
    Ok(())
}

/// Runs the three checks and, when all certify, builds the region of
/// attraction estimate.
pub fn certify(data: &LyapunovData, config: &CheckConfig) -> Result<StabilityCertificate> {
    let (ts, _) = config.validate(&data.state_box)?;
    let mesh = build_mesh(&data.state_box, config.mesh_eps, config.budget)?;
    for (name, w) in [("w1", &data.w1), ("w2", &data.w2), ("w3", &data.w3)] {
        check_positive_definite(name, w, &mesh)?;
    }
    let stride = (mesh.len() / 48).max(1);
    let sample: Vec<Vec<f64>> = mesh.points().step_by(stride).map(|p| p.to_vec()).collect();
    for (w, nu) in [&data.w1, &data.w2, &data.w3].into_iter().zip(&data.nu) {
        nu.check(w, &sample)?;
    }
    let sandwich = check_sandwich(data, config)?;
    let decay = check_decay(data, config)?;
    let growth = check_linear_growth(&data.w2, data.xi, &data.state_box, config)?;
    let outcomes = [&sandwich, &decay, &growth];
    let counterexample = outcomes.iter().find_map(|o| o.counterexample().cloned());
    let verdict = if counterexample.is_some() {
        CertificateVerdict::Counterexample
    } else if outcomes.iter().all(|o| o.is_certified()) {
        CertificateVerdict::Certified
    } else {
        CertificateVerdict::Undecided
    };
    let suggested_eps = outcomes
        .iter()
        .filter_map(|o| match o {
            CheckOutcome::Undecided { suggested_eps, .. } => Some(*suggested_eps),
            _ => None,
        })
        .reduce(f64::min);
    let region = if verdict == CertificateVerdict::Certified { Some(sublevel_region(data, &mesh)) } else { None };
    Ok(StabilityCertificate {
        verdict,
        region,
        mesh_eps: config.mesh_eps,
        inner_radius: config.inner_radius,
        t_range: (ts[0], *ts.last().expect("non-empty")),
        sandwich,
        decay,
        growth,
        counterexample,
        suggested_eps,
    })
}

/// Every point of the sphere `‖y‖ = ρ` is within `h` of a node whose norm
/// is within `h` of `ρ`, so the minimum of `w1 − variation` over those
/// nodes bounds `w1` on the sphere from below.
fn sublevel_region(data: &LyapunovData, mesh: &FiniteMesh) -> SublevelSet {
    let h = mesh.resolution;
    let rho = data.state_box.inscribed_radius_at_origin();
    let threshold = mesh
        .points()
        .filter(|p| (norm(p) - rho).abs() <= h)
        .map(|p| data.w1.eval(p) - data.w1.variation_near(p, h))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let mut nodes: Vec<(f64, f64)> = mesh
        .points()
        .map(|p| (norm(p), data.w2.eval(p) + data.w2.variation_near(p, h)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0;
    for (n, upper) in nodes {
        if upper > threshold {
            break;
        }
        reach = n;
    }
    SublevelSet { threshold, sphere_radius: rho, radius: (reach - h).max(0.0) }
}

/// Largest deviation between the supplied `V̇` and `⟨∇V, f⟩ + ∂V/∂t`
/// computed by central differences of `V`.
pub fn audit_vdot(
    data: &LyapunovData,
    f: impl Fn(&[f64], f64, &mut [f64]),
    points: &[Vec<f64>],
    t_samples: &[f64],
) -> f64 {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let mut dx = vec![0.0; data.dim()];
    for x in points {
        for &t in t_samples {
            f(x, t, &mut dx);
            let mut fd = (data.v.eval(x, t + step) - data.v.eval(x, t - step)) / (2.0 * step);
            for i in 0..x.len() {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += step;
                b[i] -= step;
                fd += dx[i] * (data.v.eval(&a, t) - data.v.eval(&b, t)) / (2.0 * step);
            }
            worst = worst.max((fd - data.vdot.eval(x, t)).abs());
        }
    }
    worst
}

/// Stabilization data for a controlled system and a CLF `V`.
#[derive(Clone)]
pub struct CLFProblem {
    pub system: ControlSystem,
    pub control_box: Hypercube,
    /// `‖f(x, u) − f(x, u′)‖ ≤ L_u‖u − u′‖`.
    pub control_lipschitz: f64,
    pub v: ScalarFn,
    pub gradient: GradFn,
    /// Target ball radius `r`.
    pub target_radius: f64,
    /// Outer radius `R` of the annulus of initial states.
    pub overshoot: f64,
    /// `M ≥ sup ‖f(x, u)‖`.
    pub flow_bound: f64,
    /// Lipschitz constant in `x` of `⟨∇V(x), f(x, u)⟩`, uniform in `u`.
    pub gradient_flow_lipschitz: f64,
    /// Resolution of the annulus mesh.
    pub annulus_eps: f64,
    pub budget: u128,
}

impl std::fmt::Debug for CLFProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CLFProblem")
            .field("control_box", &self.control_box)
            .field("target_radius", &self.target_radius)
            .field("overshoot", &self.overshoot)
            .finish()
    }
}

impl CLFProblem {
    pub fn validate(&self) -> Result<()> {
        if self.control_box.dim() != self.system.control_dim {
            return Err(Error::Argument("control box dimension must match the control".into()));
        }
        positive("target radius", self.target_radius)?;
        let outer = self.system.state_box.inscribed_radius_at_origin();
        if !(self.target_radius < self.overshoot && self.overshoot <= outer) {
            return Err(Error::Argument(format!(
                "need r < R <= {outer}, got r = {}, R = {}",
                self.target_radius, self.overshoot
            )));
        }
        for (name, v) in [
            ("control Lipschitz constant", self.control_lipschitz),
            ("flow bound", self.flow_bound),
            ("gradient-flow Lipschitz constant", self.gradient_flow_lipschitz),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be finite and non-negative")));
            }
        }
        positive("annulus resolution", self.annulus_eps)
    }

    /// `⟨∇V(x), f(x, u)⟩`.
    pub fn objective(&self, x: &[f64], u: &[f64]) -> f64 {
        let g = (self.gradient)(x);
        let mut fx = vec![0.0; self.system.dim];
        (self.system.f)(x, u, &mut fx);
        g.iter().zip(&fx).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackValue {
    pub control: Vec<f64>,
    pub index: usize,
    /// Objective at the returned control.
    pub value: CertifiedReal,
    /// `value ≤ inf_u objective + gap` up to the value's radius.
    pub gap: f64,
}

/// ε-minimizer of `u ↦ ⟨∇V(x), f(x, u)⟩` over a dyadic mesh of the control
/// box. Ties go to the lowest node index.
pub fn clf_feedback(problem: &CLFProblem, x: &[f64], eps: f64) -> Result<FeedbackValue> {
    positive("precision", eps)?;
    let grad = (problem.gradient)(x);
    let lip = product_up(norm(&grad), problem.control_lipschitz);
    let box_ = &problem.control_box;
    let delta = if lip > 0.0 { eps / (2.0 * lip) } else { box_.diameter().max(1.0) };
    let mesh = build_mesh(box_, delta, problem.budget)?;
    let mut fx = vec![0.0; problem.system.dim];
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, u) in mesh.points().enumerate() {
        (problem.system.f)(x, u, &mut fx);
        let mut val = 0.0;
        let mut mag = 0.0;
        for (a, b) in grad.iter().zip(&fx) {
            val += a * b;
            mag += (a * b).abs();
        }
        if best.map_or(true, |(_, b, _)| val < b) {
            best = Some((i, val, mag));
        }
    }
    let (index, val, mag) = best.expect("mesh is non-empty");
    let value = CertifiedReal::estimate(val, 0.0, mag, 2 * grad.len() as u32 + 2)?;
    Ok(FeedbackValue {
        control: mesh.point(index).to_vec(),
        index,
        value,
        gap: product_up(lip, mesh.resolution.min(delta)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    /// No control decreases `V` at some annulus state even with exact
    /// optimization.
    ClfInadequate,
    /// Exact optimization would decrease `V`, but the optimizer error `ε`
    /// swamps the decrease.
    OptimizerError,
    /// The analytic bound certified an `η` but closed-loop simulation did
    /// not reach the target ball.
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingFailure {
    pub cause: FailureCause,
    pub point: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingCertificate {
    pub eta: f64,
    /// Certified decrease of `V` over one sampling interval on the annulus.
    pub margin: f64,
    pub annulus_nodes: usize,
    /// Simulated horizon `η·⌈V_max / margin + 1⌉`.
    pub horizon: f64,
    /// Largest certified solver error met while entering the target ball.
    pub slack: f64,
    pub feedback_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SamplingOutcome {
    Certified(SamplingCertificate),
    Failed(SamplingFailure),
}

struct AnnulusNode {
    x: Vec<f64>,
    /// Upper bound on `⟨∇V, f⟩` under the ε-optimal control anywhere in
    /// the node's cell.
    bound: f64,
}

/// Re-optimizes at `ε/1024` to tell a CLF that cannot decrease from an
/// optimizer too coarse to find the decrease.
fn diagnose(problem: &CLFProblem, nodes: &[AnnulusNode], h: f64, eps: f64) -> Result<SamplingFailure> {
    let lam_h = product_up(problem.gradient_flow_lipschitz, h);
    let fine = eps / 1024.0;
    let mut worst: Option<(f64, &AnnulusNode)> = None;
    for node in nodes {
        let fb = clf_feedback(problem, &node.x, fine)?;
        let b = fb.value.lo() - fb.gap + lam_h;
        if worst.map_or(true, |(w, _)| b > w) {
            worst = Some((b, node));
        }
    }
    let (b, node) = worst.expect("non-empty annulus");
    Ok(if b >= 0.0 {
        SamplingFailure {
            cause: FailureCause::ClfInadequate,
            point: node.x.clone(),
            detail: format!("no control brings the dV/dt bound below {b} >= 0"),
        }
    } else {
        SamplingFailure {
            cause: FailureCause::OptimizerError,
            point: node.x.clone(),
            detail: format!("decrease {} is smaller than the optimizer error {eps}", -b),
        }
    })
}

/// Bisection for the largest `η ≤ η_max` whose certified one-step decrease
/// `−(η·B(x) + Λ·M·η²/2)` is at least half its peak over `η`, at every
/// annulus node, where `B(x)` bounds the derivative of `V` under the
/// ε-optimal held control; then closed-loop simulation from every node into
/// the target ball.
pub fn find_sampling_time(problem: &CLFProblem, eta_max: f64, eps: f64) -> Result<SamplingOutcome> {
    problem.validate()?;
    positive("maximal sampling time", eta_max)?;
    positive("precision", eps)?;
    let (r, big_r) = (problem.target_radius, problem.overshoot);
    let mesh = build_mesh(&problem.system.state_box, problem.annulus_eps, problem.budget)?;
    let h = mesh.resolution;
    let lam = problem.gradient_flow_lipschitz;
    let curvature = product_up(lam, problem.flow_bound) / 2.0;
    let nodes: Vec<AnnulusNode> = mesh
        .points()
        .filter(|p| {
            let n = norm(p);
            n >= r - h && n <= big_r + h
        })
        .collect::<Vec<_>>()
        .par_iter()
        .map(|p| {
            let fb = clf_feedback(problem, p, eps)?;
            Ok(AnnulusNode { x: p.to_vec(), bound: fb.value.hi() + product_up(lam, h) + eps })
        })
        .collect::<Result<_>>()?;
    if nodes.is_empty() {
        return Err(Error::Argument("annulus mesh is empty".into()));
    }
    let worst = nodes.iter().max_by(|a, b| a.bound.total_cmp(&b.bound)).expect("non-empty");
    if !(worst.bound < 0.0) {
        return Ok(SamplingOutcome::Failed(diagnose(problem, &nodes, h, eps)?));
    }
    let decrease = |eta: f64| -(eta * worst.bound + curvature * eta * eta);
    // Half the peak decrease keeps the simulated horizon finite.
    let peak = if curvature > 0.0 {
        decrease((-worst.bound / (2.0 * curvature)).min(eta_max))
    } else {
        decrease(eta_max)
    };
    let target = peak / 2.0;
    let mut eta = if decrease(eta_max) >= target {
        eta_max
    } else {
        let (mut lo, mut hi) = (-worst.bound / (2.0 * curvature), eta_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if decrease(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let floor = eta_max * f64::powi(2.0, -30);
    let v_max = nodes.iter().map(|n| problem.v.eval(&n.x)).fold(0.0, f64::max);
    loop {
        if eta < floor {
            return Ok(SamplingOutcome::Failed(SamplingFailure {
                cause: FailureCause::Simulation,
                point: worst.x.clone(),
                detail: "no sampling time above the resolution floor passed simulation".into(),
            }));
        }
        let margin = decrease(eta);
        let steps = (v_max / margin).ceil() + 1.0;
        let horizon = eta * steps;
        match simulate_annulus(problem, &nodes, eta, eps, steps as u64)? {
            Ok(slack) => {
                return Ok(SamplingOutcome::Certified(SamplingCertificate {
                    eta,
                    margin,
                    annulus_nodes: nodes.len(),
                    horizon,
                    slack,
                    feedback_eps: eps,
                }))
            }
            Err(_) => eta /= 2.0,
        }
    }
}

const SEGMENT_SAMPLES: u64 = 8;

/// Closed-loop runs from every annulus node, in segments of a few samples,
/// stopping once the sampled state is inside `B_{r + slack}`. Returns the
/// largest slack used, or the first node that failed.
fn simulate_annulus(
    problem: &CLFProblem,
    nodes: &[AnnulusNode],
    eta: f64,
    eps: f64,
    steps: u64,
) -> Result<std::result::Result<f64, Vec<f64>>> {
    let sys = &problem.system;
    let l = sys.lipschitz_x;
    let p = problem.clone();
    let policy = SampleHoldPolicy::new(
        move |x| clf_feedback(&p, x, eps).map(|fb| fb.control).unwrap_or_else(|_| p.control_box.center.clone()),
        eta,
    )?;
    let solver_eps = (problem.target_radius * 1e-3).max(1e-9);
    let runs: Vec<std::result::Result<f64, Vec<f64>>> = nodes
        .par_iter()
        .map(|node| {
            let mut x = node.x.clone();
            let mut err = 0.0f64;
            let mut done = 0u64;
            loop {
                if norm(&x) <= problem.target_radius + err {
                    return Ok(Ok(err));
                }
                if done >= steps {
                    return Ok(Err(node.x.clone()));
                }
                let n = SEGMENT_SAMPLES.min(steps - done);
                let span = eta * n as f64;
                let sol = match sample_hold_trajectory(sys, &policy, &x, span, solver_eps) {
                    Ok(s) => s,
                    Err(Error::DomainExit { .. }) => return Ok(Err(node.x.clone())),
                    Err(e) => return Err(e),
                };
                let grow = (l * eta).exp();
                for k in 1..=n {
                    let xk = sol.value_at(eta * k as f64);
                    let ek = err * grow.powi(k as i32) + sol.error_bound.hi();
                    if norm(&xk) <= problem.target_radius + ek {
                        return Ok(Ok(ek));
                    }
                }
                err = err * grow.powi(n as i32) + sol.error_bound.hi();
                x = sol.endpoint().to_vec();
                done += n;
            }
        })
        .collect::<Result<_>>()?;
    let mut slack: f64 = 0.0;
    for run in runs {
        match run {
            Ok(s) => slack = slack.max(s),
            Err(x) => return Ok(Err(x)),
        }
    }
    Ok(Ok(slack))
}
