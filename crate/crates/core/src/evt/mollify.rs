use super::PiecewisePolicy;
use crate::error::{positive, Error, Result};
use crate::real::CertifiedReal;

const DEFAULT_CELLS: usize = 32;

/// Convolution of a policy with the product kernel
/// `k(y) ∝ Π (1 − (y_i/a)²)^(d+1)` on `[−a, a]ⁿ`, `a = width/√n`.
///
/// The kernel is `d` times continuously differentiable and supported in
/// the ball of radius `width`, so the convolution is `C^d`, keeps the
/// Lipschitz constant of the policy and stays within `Lip·width` of it.
/// Evaluation integrates the kernel exactly over `cells` subcells per axis
/// and samples the policy at subcell midpoints; the certified radius
/// covers the sampling error.
#[derive(Debug, Clone)]
pub struct MollifiedPolicy {
    pub policy: PiecewisePolicy,
    pub width: f64,
    pub order: u32,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Antiderivative of `(1 − s²)^p`.
fn kernel_primitive(p: u32, s: f64) -> f64 {
    (0..=p)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(p, k) * s.powi(2 * k as i32 + 1) / (2 * k + 1) as f64
        })
        .sum()
}

pub fn mollify(policy: &PiecewisePolicy, order: u32, width: f64) -> Result<MollifiedPolicy> {
    mollify_with_cells(policy, order, width, DEFAULT_CELLS)
}

pub fn mollify_with_cells(policy: &PiecewisePolicy, order: u32, width: f64, cells: usize) -> Result<MollifiedPolicy> {
    positive("mollifier width", width)?;
    if order == 0 {
        return Err(Error::Argument("smoothness order must be at least 1".into()));
    }
    if cells == 0 {
        return Err(Error::Argument("need at least one kernel cell".into()));
    }
    let dim = policy.nodes.dim();
    let a = width / (dim as f64).sqrt();
    let p = order + 1;
    let total = kernel_primitive(p, 1.0) - kernel_primitive(p, -1.0);
    let edges: Vec<f64> = (0..=cells).map(|i| -1.0 + 2.0 * i as f64 / cells as f64).collect();
    let weights = edges
        .windows(2)
        .map(|e| (kernel_primitive(p, e[1]) - kernel_primitive(p, e[0])) / total)
        .collect();
    let offsets = edges.windows(2).map(|e| a * (e[0] + e[1]) / 2.0).collect();
    Ok(MollifiedPolicy { policy: policy.clone(), width, order, offsets, weights, dim })
}

impl MollifiedPolicy {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.accumulate(x).0
    }

    /// Weighted sum and weighted sum of magnitudes.
    fn accumulate(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.policy.output_dim;
        let q = self.offsets.len();
        let mut acc = vec![0.0; m];
        let mut mag = vec![0.0; m];
        let mut y = vec![0.0; self.dim];
        let mut out = vec![0.0; m];
        for code in 0..q.pow(self.dim as u32) {
            let mut c = code;
            let mut w = 1.0;
            for axis in (0..self.dim).rev() {
                let i = c % q;
                c /= q;
                y[axis] = x[axis] - self.offsets[i];
                w *= self.weights[i];
            }
            self.policy.eval_into(&y, &mut out);
            for ((a, g), o) in acc.iter_mut().zip(mag.iter_mut()).zip(&out) {
                *a += w * o;
                *g += w * o.abs();
            }
        }
        (acc, mag)
    }

    /// Per-coordinate enclosures of the exact convolution at `x`.
    pub fn eval_certified(&self, x: &[f64]) -> Vec<CertifiedReal> {
        let cells = self.offsets.len() as f64;
        let sampling = self.policy.vector_lipschitz() * self.width / cells;
        let terms = (self.offsets.len().pow(self.dim as u32) * (self.dim + 2)) as u32;
        let (acc, mag) = self.accumulate(x);
        acc.into_iter()
            .zip(mag)
            .map(|(v, g)| CertifiedReal::estimate(v, sampling, g, terms).expect("finite"))
            .collect()
    }

    /// Guaranteed bound on the sup-norm distance to the input policy.
    pub fn deviation_bound(&self) -> f64 {
        (self.policy.vector_lipschitz() * self.width).next_up()
    }
}
