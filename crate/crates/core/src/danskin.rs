//! Max-functions `ψ(x) = max_θ φ(x, θ)`: values, sets of δ-optimizers and
//! directional derivatives, all from finite meshes of the parameter box.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::forms::FnForm;
use crate::mesh::{build_mesh, norm, FiniteMesh, Hypercube, DEFAULT_MESH_BUDGET};
use crate::modulus::Modulus;
use crate::optimize::maximize_on_box;
use crate::real::CertifiedReal;

pub type ObjectiveFn = Arc<dyn Fn(&[f64], &[f64]) -> CertifiedReal + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

const AUDIT_BUDGET: usize = 8_000_000;

/// `φ(x, θ)` with its `x`-gradient and continuity data.
///
/// `modulus_x` holds uniformly in `θ`, `modulus_theta` uniformly in `x`,
/// and `grad_modulus` bounds `‖∇ₓφ(x,θ) − ∇ₓφ(x',θ')‖` in terms of the
/// joint distance `‖(x,θ) − (x',θ')‖`.
#[derive(Clone)]
pub struct ParametricObjective {
    eval: ObjectiveFn,
    grad_x: GradientFn,
    pub modulus_x: Modulus,
    pub modulus_theta: Modulus,
    pub grad_modulus: Modulus,
}

impl fmt::Debug for ParametricObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricObjective")
            .field("modulus_x", &self.modulus_x)
            .field("modulus_theta", &self.modulus_theta)
            .field("grad_modulus", &self.grad_modulus)
            .finish()
    }
}

impl ParametricObjective {
    pub fn new(
        eval: impl Fn(&[f64], &[f64]) -> CertifiedReal + Send + Sync + 'static,
        grad_x: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        modulus_x: Modulus,
        modulus_theta: Modulus,
        grad_modulus: Modulus,
    ) -> Self {
        Self { eval: Arc::new(eval), grad_x: Arc::new(grad_x), modulus_x, modulus_theta, grad_modulus }
    }

    /// Objective from a function form over arguments `[x.., θ..]`. The
    /// moduli in `x` and `θ` come from interval gradient bounds over
    /// `x_box × Θ`; the gradient modulus must be supplied.
    pub fn from_form(form: FnForm, x_box: &Hypercube, theta: &ThetaDomain, grad_lipschitz: f64) -> Result<Self> {
        let n = x_box.dim();
        let p = theta.cube.dim();
        if form.validate()? > n + p {
            return Err(Error::Argument(format!("objective reads more than the {} available arguments", n + p)));
        }
        let lo: Vec<f64> = (0..n).map(|i| x_box.lo(i)).chain((0..p).map(|i| theta.cube.lo(i))).collect();
        let hi: Vec<f64> = (0..n).map(|i| x_box.hi(i)).chain((0..p).map(|i| theta.cube.hi(i))).collect();
        let lx = form.partial_lipschitz(&lo, &hi, 0..n);
        let lt = form.partial_lipschitz(&lo, &hi, n..n + p);
        let (f, g) = (form.clone(), form);
        Ok(Self::new(
            move |x, t| {
                let arg: Vec<f64> = x.iter().chain(t).copied().collect();
                let r = f.eval_enclosure(&arg);
                CertifiedReal::new(r.mid(), (r.width() / 2.0).next_up()).unwrap_or(CertifiedReal::exact(f64::NAN))
            },
            move |x, t| {
                let arg: Vec<f64> = x.iter().chain(t).copied().collect();
                g.grad(&arg, n)
            },
            Modulus::lipschitz(lx),
            Modulus::lipschitz(lt),
            Modulus::lipschitz(grad_lipschitz),
        ))
    }

    pub fn eval(&self, x: &[f64], theta: &[f64]) -> CertifiedReal {
        (self.eval)(x, theta)
    }

    pub fn grad_x(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        (self.grad_x)(x, theta)
    }

    /// `⟨∇ₓφ(x,θ), v⟩`.
    pub fn directional(&self, x: &[f64], theta: &[f64], v: &[f64]) -> f64 {
        self.grad_x(x, theta).iter().zip(v).map(|(g, vi)| g * vi).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDomain {
    pub cube: Hypercube,
    pub budget: u128,
}

impl ThetaDomain {
    pub fn new(cube: Hypercube) -> Self {
        Self { cube, budget: DEFAULT_MESH_BUDGET }
    }

    pub fn mesh(&self, eps: f64) -> Result<FiniteMesh> {
        build_mesh(&self.cube, eps, self.budget)
    }

    /// Mesh on which `φ(x, ·)` is within `ε/2` of its values everywhere.
    fn value_mesh(&self, obj: &ParametricObjective, eps: f64) -> Result<FiniteMesh> {
        let r = self.cube.diameter() / 2.0;
        let step = obj.modulus_theta.step(eps / 2.0, &self.cube.center, r.max(f64::MIN_POSITIVE))?;
        if step.is_finite() {
            self.mesh(step)
        } else {
            self.mesh(r.max(1.0))
        }
    }
}

struct Scan {
    values: Vec<CertifiedReal>,
    best: usize,
}

fn scan(obj: &ParametricObjective, mesh: &FiniteMesh, x: &[f64]) -> Scan {
    let values: Vec<CertifiedReal> = (0..mesh.len()).into_par_iter().map(|i| obj.eval(x, mesh.point(i))).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.value > values[best].value {
            best = i;
        }
    }
    Scan { values, best }
}

/// `ψ̂` from a mesh scan: `ψ ∈ [m − r, m + r + ε/2]` for the mesh maximum
/// `m` with evaluation radius `r`.
fn psi_from_scan(s: &Scan, eps: f64) -> CertifiedReal {
    let m = s.values[s.best];
    let worst = s.values.iter().map(|v| v.radius).fold(0.0, f64::max);
    CertifiedReal::exact(m.value + eps / 4.0).widen(eps / 4.0 + worst)
}

pub fn psi(obj: &ParametricObjective, theta: &ThetaDomain, x: &[f64], eps: f64) -> Result<CertifiedReal> {
    positive("psi precision", eps)?;
    let mesh = theta.value_mesh(obj, eps)?;
    Ok(psi_from_scan(&scan(obj, &mesh, x), eps))
}

/// Mesh nodes that may be δ-optimizers of `φ(x, ·)`.
#[derive(Debug, Clone)]
pub struct DeltaOptimizerSet {
    pub x: Vec<f64>,
    pub delta: f64,
    pub mesh_eps: f64,
    pub points: Vec<Vec<f64>>,
    /// Position of each point in the parameter mesh.
    pub indices: Vec<usize>,
    pub psi_hat: CertifiedReal,
    /// Mesh node with the largest value, lowest index on ties.
    pub witness: Vec<f64>,
    /// Size of the parameter mesh the points were drawn from.
    pub mesh_size: usize,
}

impl DeltaOptimizerSet {
    /// Diagonal of the bounding box of the points.
    pub fn diameter_bound(&self) -> f64 {
        let p = self.points[0].len();
        let mut s = 0.0;
        for axis in 0..p {
            let lo = self.points.iter().map(|t| t[axis]).fold(f64::INFINITY, f64::min);
            let hi = self.points.iter().map(|t| t[axis]).fold(f64::NEG_INFINITY, f64::max);
            s += (hi - lo) * (hi - lo);
        }
        s.sqrt().next_up()
    }
}

/// Keeps every node whose certified value can reach `ψ̂ − δ`, so no true
/// δ-optimizer on the mesh is dropped.
pub fn delta_optimizers(
    obj: &ParametricObjective,
    theta: &ThetaDomain,
    x: &[f64],
    delta: f64,
    eps: f64,
) -> Result<DeltaOptimizerSet> {
    positive("delta", delta)?;
    positive("mesh precision", eps)?;
    let mesh = theta.value_mesh(obj, eps)?;
    let s = scan(obj, &mesh, x);
    let psi_hat = psi_from_scan(&s, eps);
    let threshold = psi_hat.lo() - delta;
    let indices: Vec<usize> = (0..mesh.len()).filter(|&i| s.values[i].hi() >= threshold).collect();
    let points = indices.iter().map(|&i| mesh.point(i).to_vec()).collect();
    Ok(DeltaOptimizerSet {
        x: x.to_vec(),
        delta,
        mesh_eps: eps,
        points,
        indices,
        psi_hat,
        witness: mesh.point(s.best).to_vec(),
        mesh_size: mesh.len(),
    })
}

#[derive(Debug, Clone)]
pub struct DirectionalDerivative {
    /// Max of `⟨∇ₓφ(x,θ), v⟩` over the δ-optimizer set; the radius covers
    /// the gap between mesh nodes and the continuum.
    pub value: CertifiedReal,
    /// Max minus min of the member derivatives.
    pub spread: f64,
    /// `‖v‖·μ_∇(diam)`: what the gradient modulus allows the spread to be.
    pub spread_slack: f64,
    /// Lowest-index member attaining the max.
    pub witness: Vec<f64>,
    pub set: DeltaOptimizerSet,
}

/// Uses a parameter mesh at precision `δ/2`.
pub fn directional_derivative(
    obj: &ParametricObjective,
    theta: &ThetaDomain,
    x: &[f64],
    v: &[f64],
    delta: f64,
) -> Result<DirectionalDerivative> {
    directional_derivative_with_mesh(obj, theta, x, v, delta, delta / 2.0)
}

pub fn directional_derivative_with_mesh(
    obj: &ParametricObjective,
    theta: &ThetaDomain,
    x: &[f64],
    v: &[f64],
    delta: f64,
    eps: f64,
) -> Result<DirectionalDerivative> {
    positive("delta", delta)?;
    if v.len() != x.len() {
        return Err(Error::Argument("direction and point differ in dimension".into()));
    }
    let set = delta_optimizers(obj, theta, x, delta, eps)?;
    let ders: Vec<f64> = set.points.iter().map(|t| obj.directional(x, t, v)).collect();
    let mut best = 0;
    for (i, d) in ders.iter().enumerate() {
        if *d > ders[best] {
            best = i;
        }
    }
    let lo = ders.iter().copied().fold(f64::INFINITY, f64::min);
    let vn = norm(v);
    let mesh_res = theta.value_mesh(obj, eps)?.resolution;
    let gmag: f64 = set.points.iter().map(|t| norm(&obj.grad_x(x, t))).fold(0.0, f64::max);
    let value = if vn == 0.0 {
        CertifiedReal::exact(0.0)
    } else {
        CertifiedReal::estimate(ders[best], vn * obj.grad_modulus.global_variation(mesh_res), gmag * vn, 2 * x.len() as u32 + 2)?
    };
    let diam = set.diameter_bound();
    Ok(DirectionalDerivative {
        value,
        spread: ders[best] - lo,
        spread_slack: (vn * obj.grad_modulus.global_variation(diam)).next_up(),
        witness: set.points[best].clone(),
        set,
    })
}

/// `ψ` has the `x`-modulus of `φ`.
pub fn psi_modulus(obj: &ParametricObjective) -> Modulus {
    obj.modulus_x.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub h: f64,
    pub quotient: CertifiedReal,
    pub lower: f64,
    pub upper: f64,
    /// Whether `2μₓ(h‖v‖)` plus the mesh slack fits inside `δ`, the
    /// condition under which `upper` is a guaranteed bound.
    pub upper_valid: bool,
}

impl AuditRow {
    /// The quotient enclosure meets `[lower, upper]` (only `lower` when the
    /// upper bound is not guaranteed).
    pub fn sandwiched(&self) -> bool {
        self.quotient.hi() >= self.lower && (!self.upper_valid || self.quotient.lo() <= self.upper)
    }
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub derivative: DirectionalDerivative,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,quotient,quotient_radius,lower,upper,upper_valid\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?},{}\n",
                r.h, r.quotient.value, r.quotient.radius, r.lower, r.upper, r.upper_valid
            ));
        }
        s
    }
}

/// Difference quotients `(ψ(x+hv) − ψ(x))/h` against the bounds the
/// derivative formula predicts for them.
///
/// For each `h` (clamped to `(0, 1]`), `ψ` is computed by branch and bound
/// to precision `h·δ/8`. With `θ̂` the best node found at `x`:
///
/// * `lower = D_vφ(x,θ̂) − ‖v‖·μ_∇(h‖v‖) − gap/h`, where `gap` bounds
///   `ψ(x) − φ(x,θ̂)`;
/// * `upper = D_vψ̂ + radius + ‖v‖·μ_∇(h‖v‖)`, valid when the maximizers
///   at `x + hv` are δ-optimizers at `x`.
pub fn finite_difference_audit(
    obj: &ParametricObjective,
    theta: &ThetaDomain,
    x: &[f64],
    v: &[f64],
    delta: f64,
    hs: &[f64],
) -> Result<AuditReport> {
    if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Argument("audit needs positive step sizes".into()));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument("audit step sizes must decrease".into()));
    }
    let derivative = directional_derivative(obj, theta, x, v, delta)?;
    let vn = norm(v);
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let h = h.min(1.0);
        let eps_psi = h * delta / 8.0;
        let at = |y: &[f64]| {
            let y = y.to_vec();
            maximize_on_box(|t| obj.eval(&y, t), &theta.cube, &obj.modulus_theta, eps_psi, AUDIT_BUDGET)
        };
        let base = at(x)?;
        let xh: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let moved = at(&xh)?;
        let q = (moved.value - base.value).scale(1.0 / h);
        let drift = vn * obj.grad_modulus.global_variation(h * vn);
        let gap = (base.value.hi() - base.at_argmax.lo()).max(0.0);
        let d_hat = obj.directional(x, &base.argmax, v);
        let lower = (d_hat - drift - gap / h).next_down();
        let upper = (derivative.value.hi() + drift).next_up();
        let upper_valid = 2.0 * obj.modulus_x.global_variation(h * vn) + derivative.set.mesh_eps / 2.0 <= delta;
        rows.push(AuditRow { h, quotient: q, lower, upper, upper_valid });
    }
    Ok(AuditReport { derivative, rows })
}
