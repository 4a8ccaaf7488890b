//! Approximate optimizers over equi-Lipschitz, equi-bounded policy classes.
//!
//! The class is made finite by fixing node values on a mesh of the domain
//! to a dyadic value grid and extending each assignment by a lower McShane
//! extension. Every admissible policy is within the requested sup-norm
//! precision of some member, so minimizing a uniformly continuous
//! functional over the members yields an ε-optimizer.

mod functional;
mod mollify;
mod table;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::mesh::{build_mesh, dist, norm, FiniteMesh, Hypercube, SetDescriptor, DEFAULT_MESH_BUDGET};
use crate::real::CertifiedReal;

pub use functional::Functional;
pub use mollify::{mollify, MollifiedPolicy};
pub use table::{parse_policy_table, write_policy_table};

pub const DEFAULT_NET_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyClass {
    pub domain: Hypercube,
    pub output_dim: usize,
    pub lipschitz: f64,
    pub bound: f64,
    pub smooth_order: u32,
    /// Build members with per-coordinate constant `L/√m`, so their vector
    /// Lipschitz constant stays within `L`.
    pub exact_membership: bool,
}

impl PolicyClass {
    pub fn new(domain: Hypercube, output_dim: usize, lipschitz: f64, bound: f64) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::Argument("policy output dimension must be at least 1".into()));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Argument(format!("Lipschitz constant must be finite and >= 0, got {lipschitz}")));
        }
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::Argument(format!("bound must be finite and >= 0, got {bound}")));
        }
        Ok(Self { domain, output_dim, lipschitz, bound, smooth_order: 0, exact_membership: false })
    }

    pub fn with_smooth_order(mut self, d: u32) -> Self {
        self.smooth_order = d;
        self
    }

    pub fn with_exact_membership(mut self, on: bool) -> Self {
        self.exact_membership = on;
        self
    }

    /// Per-coordinate constant used by member extensions.
    pub fn extension_lipschitz(&self) -> f64 {
        if self.exact_membership {
            self.lipschitz / (self.output_dim as f64).sqrt()
        } else {
            self.lipschitz
        }
    }
}

/// Node values extended by `f_j(x) = max_i (v_ij − L‖x − x_i‖)` and then
/// projected radially onto the ball of radius `bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolicy {
    pub nodes: Arc<FiniteMesh>,
    /// Row-major `N × m`.
    pub values: Vec<f64>,
    pub output_dim: usize,
    /// Per-coordinate extension constant.
    pub lipschitz: f64,
    pub bound: f64,
    /// Spacing of the value grid the values were drawn from; zero if the
    /// values are arbitrary.
    pub grid: f64,
}

impl PiecewisePolicy {
    pub fn new(nodes: Arc<FiniteMesh>, values: Vec<f64>, output_dim: usize, lipschitz: f64, bound: f64) -> Result<Self> {
        if output_dim == 0 || values.len() != nodes.len() * output_dim {
            return Err(Error::Argument(format!(
                "expected {} values for {} nodes, got {}",
                nodes.len() * output_dim,
                nodes.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("policy values must be finite".into()));
        }
        Ok(Self { nodes, values, output_dim, lipschitz, bound, grid: 0.0 })
    }

    pub fn zero(domain: &Hypercube, output_dim: usize, bound: f64) -> Self {
        let nodes = FiniteMesh::from_points(vec![domain.center.clone()], domain.diameter() / 2.0, SetDescriptor::Cube(domain.clone()))
            .expect("center point is a valid mesh");
        Self { nodes: Arc::new(nodes), values: vec![0.0; output_dim], output_dim, lipschitz: 0.0, bound, grid: 0.0 }
    }

    pub fn node_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.output_dim..(i + 1) * self.output_dim]
    }

    /// Lipschitz constant of the vector-valued extension.
    pub fn vector_lipschitz(&self) -> f64 {
        (self.lipschitz * (self.output_dim as f64).sqrt()).next_up()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(f64::NEG_INFINITY);
        for (i, p) in self.nodes.points().enumerate() {
            let d = self.lipschitz * dist(x, p);
            for (o, v) in out.iter_mut().zip(self.node_value(i)) {
                *o = o.max(v - d);
            }
        }
        let r = norm(out);
        if r > self.bound {
            let s = self.bound / r;
            out.iter_mut().for_each(|o| *o *= s);
            if norm(out) > self.bound {
                out.iter_mut().for_each(|o| *o *= 1.0 - 2.0 * f64::EPSILON);
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Scalar output for one-dimensional policies.
    pub fn eval1(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.eval_into(x, &mut out);
        out[0]
    }
}

/// Lower McShane extension of node data with per-coordinate constant `L`.
///
/// Fails with [`Error::Incompatible`] on the first pair of nodes whose
/// values differ by more than `L` times their distance in some coordinate.
pub fn lipschitz_extend(nodes: &[Vec<f64>], values: &[Vec<f64>], lipschitz: f64) -> Result<PiecewisePolicy> {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(Error::Argument("need one value vector per node, at least one node".into()));
    }
    let m = values[0].len();
    if m == 0 || values.iter().any(|v| v.len() != m) {
        return Err(Error::Argument("value vectors must share a positive length".into()));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::Argument(format!("Lipschitz constant must be finite and >= 0, got {lipschitz}")));
    }
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let allowed = lipschitz * dist(&nodes[i], &nodes[j]);
            // One ulp of the larger value absorbs rounding in the data.
            for coord in 0..m {
                let gap = (values[i][coord] - values[j][coord]).abs();
                let ulp = values[i][coord].abs().max(values[j][coord].abs()) * f64::EPSILON;
                if gap > allowed + ulp {
                    return Err(Error::Incompatible { i, j, coord });
                }
            }
        }
    }
    let mesh = FiniteMesh::from_points(nodes.to_vec(), 0.0, SetDescriptor::Custom("extension nodes".into()))?;
    PiecewisePolicy::new(Arc::new(mesh), values.concat(), m, lipschitz, f64::INFINITY)
}

/// Finite family whose extensions form a sup-norm ε-net of a class.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub nodes: Arc<FiniteMesh>,
    pub grid: f64,
    pub output_dim: usize,
    pub lipschitz: f64,
    pub bound: f64,
    pub precision: f64,
    /// Member `k` has values `grid · members[k·N·m + i·m + j]`.
    indices: Vec<i32>,
}

impl PolicyNet {
    pub fn len(&self) -> usize {
        self.indices.len() / (self.nodes.len() * self.output_dim)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn member(&self, k: usize) -> PiecewisePolicy {
        let w = self.nodes.len() * self.output_dim;
        let values = self.indices[k * w..(k + 1) * w].iter().map(|&i| self.grid * i as f64).collect();
        PiecewisePolicy {
            nodes: self.nodes.clone(),
            values,
            output_dim: self.output_dim,
            lipschitz: self.lipschitz,
            bound: self.bound,
            grid: self.grid,
        }
    }

    pub fn members(&self) -> impl Iterator<Item = PiecewisePolicy> + '_ {
        (0..self.len()).map(|k| self.member(k))
    }
}

/// Largest power of two not above `x`.
pub(crate) fn dyadic_floor(x: f64) -> f64 {
    let e = x.log2().floor() as i32;
    let mut h = 2f64.powi(e);
    while h > x {
        h /= 2.0;
    }
    while h * 2.0 <= x {
        h *= 2.0;
    }
    h
}

/// Node and value resolutions for a sup-norm precision `eps`.
///
/// Snapping a value to the grid costs `√m·h/2` and the node spacing
/// `2L√m·ρ`; the split gives each a third and two thirds of `eps`.
fn net_resolutions(class: &PolicyClass, eps: f64) -> (f64, f64) {
    let sm = (class.output_dim as f64).sqrt();
    let l = class.extension_lipschitz();
    let rho = if l == 0.0 { f64::INFINITY } else { eps / (3.0 * l * sm) };
    let h = dyadic_floor(2.0 * eps / (3.0 * sm));
    (rho, h)
}

pub fn enumerate_policy_net(class: &PolicyClass, eps: f64) -> Result<Vec<PiecewisePolicy>> {
    let net = build_policy_net(class, eps, DEFAULT_NET_BUDGET)?;
    Ok(net.members().collect())
}

/// Enumerates every grid assignment on the node mesh that is compatible
/// with the class constant up to one grid step, in depth-first order.
pub fn build_policy_net(class: &PolicyClass, eps: f64, budget: u128) -> Result<PolicyNet> {
    positive("net precision", eps)?;
    let m = class.output_dim;
    let l = class.extension_lipschitz();
    if class.bound == 0.0 || eps >= 2.0 * class.bound {
        let zero = PiecewisePolicy::zero(&class.domain, m, class.bound);
        return Ok(PolicyNet {
            nodes: zero.nodes,
            grid: 0.0,
            output_dim: m,
            lipschitz: 0.0,
            bound: class.bound,
            precision: eps,
            indices: vec![0; m],
        });
    }
    let (rho, h) = net_resolutions(class, eps);
    let mesh_eps = if rho.is_finite() { rho } else { class.domain.diameter().max(1.0) };
    let nodes = build_mesh(&class.domain, mesh_eps, DEFAULT_MESH_BUDGET)?;
    let n = nodes.len();

    // Value vectors: grid points of the m-cube that can be the snap of a
    // point in the ball of radius K.
    let jmax = (class.bound / h).ceil() as i32;
    let reach = class.bound + (m as f64).sqrt() * h / 2.0;
    let side = 2 * jmax as usize + 1;
    let candidates: Vec<Vec<i32>> = (0..side.pow(m as u32))
        .map(|mut code| {
            let mut c = vec![0; m];
            for slot in c.iter_mut().rev() {
                *slot = (code % side) as i32 - jmax;
                code /= side;
            }
            c
        })
        .filter(|c| norm(&c.iter().map(|&j| h * j as f64).collect::<Vec<_>>()) <= reach)
        .collect();
    let required = (candidates.len() as u128).saturating_pow(n as u32);

    // Allowed index gap between nodes a and b.
    let steps: Vec<i64> = (0..n * n)
        .map(|k| {
            let (a, b) = (k / n, k % n);
            let gap = l * dist(nodes.point(a), nodes.point(b)) / h + 1.0;
            (gap * (1.0 + 1e-12)).floor() as i64
        })
        .collect();

    let mut indices: Vec<i32> = Vec::new();
    let mut choice = vec![0usize; n];
    let mut assigned: Vec<&[i32]> = Vec::with_capacity(n);
    let mut depth = 0usize;
    let mut count: u128 = 0;
    // Iterative depth-first search; `choice[depth]` is the next candidate
    // to try at that depth.
    loop {
        if depth == n {
            count += 1;
            if count > budget {
                return Err(Error::Budget { what: "policy net", required, budget });
            }
            for a in &assigned {
                indices.extend_from_slice(a);
            }
            depth -= 1;
            assigned.pop();
            continue;
        }
        let mut found = None;
        while choice[depth] < candidates.len() {
            let c = &candidates[choice[depth]];
            choice[depth] += 1;
            let ok = assigned.iter().enumerate().all(|(b, prev)| {
                let s = steps[depth * n + b];
                c.iter().zip(prev.iter()).all(|(x, y)| ((x - y) as i64).abs() <= s)
            });
            if ok {
                found = Some(c.as_slice());
                break;
            }
        }
        match found {
            Some(c) => {
                assigned.push(c);
                depth += 1;
                if depth < n {
                    choice[depth] = 0;
                }
            }
            None => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
                assigned.pop();
            }
        }
    }

    Ok(PolicyNet {
        nodes: Arc::new(nodes),
        grid: h,
        output_dim: m,
        lipschitz: l,
        bound: class.bound,
        precision: eps,
        indices,
    })
}

#[derive(Debug, Clone)]
pub struct EpsilonOptimizer {
    pub policy: PiecewisePolicy,
    pub value: CertifiedReal,
    /// Index of the policy within the enumerated net.
    pub index: usize,
    pub net_size: usize,
    /// Sup-norm resolution of the net that was searched.
    pub net_precision: f64,
}

/// Returns `κ^ε` with `J[κ^ε] − ε ≤ inf J` over the class.
///
/// The net is built at `δ = μ_J⁻¹(ε/2)`; the other half of `ε` absorbs
/// the evaluation radii, which must therefore stay below `ε/4`.
pub fn epsilon_minimize(j: &Functional, class: &PolicyClass, eps: f64) -> Result<EpsilonOptimizer> {
    epsilon_minimize_with_budget(j, class, eps, DEFAULT_NET_BUDGET)
}

pub fn epsilon_minimize_with_budget(
    j: &Functional,
    class: &PolicyClass,
    eps: f64,
    budget: u128,
) -> Result<EpsilonOptimizer> {
    positive("optimizer precision", eps)?;
    let delta = j.modulus.global_step(eps / 2.0)?;
    let net_eps = if delta.is_finite() { delta } else { 2.0 * class.bound.max(1.0) };
    let net = build_policy_net(class, net_eps, budget)?;
    let values: Vec<CertifiedReal> = (0..net.len()).into_par_iter().map(|k| j.eval(&net.member(k))).collect();
    let (index, value) = net_minimum(&values);
    let worst = values.iter().map(|v| v.radius).fold(0.0, f64::max);
    if 4.0 * worst > eps {
        return Err(Error::Contract(format!(
            "functional evaluation radius {worst} exceeds a quarter of the precision {eps}"
        )));
    }
    Ok(EpsilonOptimizer { policy: net.member(index), value, index, net_size: net.len(), net_precision: net_eps })
}

/// Smallest value, ties to the lowest index.
pub fn net_minimum(values: &[CertifiedReal]) -> (usize, CertifiedReal) {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if v.value < values[best].value {
            best = k;
        }
    }
    (best, values[best])
}
