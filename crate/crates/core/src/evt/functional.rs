use std::fmt;
use std::sync::Arc;

use super::PiecewisePolicy;
use crate::error::{positive, Error, Result};
use crate::func::ScalarFn;
use crate::mesh::{build_mesh, norm, Hypercube, DEFAULT_MESH_BUDGET};
use crate::modulus::Modulus;
use crate::real::CertifiedReal;

pub type PolicyEvaluator = Arc<dyn Fn(&PiecewisePolicy) -> CertifiedReal + Send + Sync>;

/// A cost on policies, uniformly continuous in the sup-norm distance.
///
/// The evaluator must be pure; the minimizer calls it from many threads.
#[derive(Clone)]
pub struct Functional {
    eval: PolicyEvaluator,
    pub modulus: Modulus,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional").field("modulus", &self.modulus).finish()
    }
}

fn target_lipschitz(target: &[ScalarFn]) -> Result<f64> {
    let mut s = 0.0;
    for g in target {
        let l = g
            .modulus
            .lipschitz_constant()
            .ok_or_else(|| Error::Argument("target components need Lipschitz moduli".into()))?;
        s += l * l;
    }
    Ok(s.sqrt().next_up())
}

impl Functional {
    pub fn new(eval: impl Fn(&PiecewisePolicy) -> CertifiedReal + Send + Sync + 'static, modulus: Modulus) -> Self {
        Self { eval: Arc::new(eval), modulus }
    }

    pub fn eval(&self, policy: &PiecewisePolicy) -> CertifiedReal {
        (self.eval)(policy)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| CertifiedReal::exact(c), Modulus::lipschitz(0.0))
    }

    /// `offset + weight · sup_x ‖κ(x) − g(x)‖`, the supremum taken over a
    /// mesh of the domain at `resolution` and corrected by the Lipschitz
    /// slack between nodes.
    pub fn sup_deviation(domain: Hypercube, target: Vec<ScalarFn>, offset: f64, weight: f64, resolution: f64) -> Result<Self> {
        positive("weight", weight)?;
        let lg = target_lipschitz(&target)?;
        let mesh = Arc::new(build_mesh(&domain, resolution, DEFAULT_MESH_BUDGET)?);
        let res = mesh.resolution;
        Ok(Self::new(
            move |p| {
                let mut out = vec![0.0; p.output_dim];
                let mut top: f64 = 0.0;
                for x in mesh.points() {
                    p.eval_into(x, &mut out);
                    for (o, g) in out.iter_mut().zip(&target) {
                        *o -= g.eval(x);
                    }
                    top = top.max(norm(&out));
                }
                let slack = (p.vector_lipschitz() + lg) * res / 2.0;
                let sup = CertifiedReal::estimate(top + slack, slack, top + p.bound, 8)
                    .expect("finite policy values");
                CertifiedReal::exact(offset) + sup.scale(weight)
            },
            Modulus::lipschitz(weight),
        ))
    }

    /// `offset + weight · ‖κ(x0) − a‖²` for a class bounded by `bound`.
    pub fn point_quadratic(x0: Vec<f64>, a: Vec<f64>, offset: f64, weight: f64, bound: f64) -> Result<Self> {
        positive("weight", weight)?;
        let lip = weight * 2.0 * (bound + norm(&a));
        Ok(Self::new(
            move |p| {
                let v = p.eval(&x0);
                let sq = v
                    .iter()
                    .zip(&a)
                    .map(|(vi, ai)| {
                        let d = CertifiedReal::exact(*vi) - CertifiedReal::exact(*ai);
                        d * d
                    })
                    .fold(CertifiedReal::exact(0.0), |acc, t| acc + t);
                CertifiedReal::exact(offset) + sq.scale(weight)
            },
            Modulus::lipschitz(lip.next_up()),
        ))
    }

    /// `offset + weight · mean_X ‖κ − g‖²`, by the midpoint rule on
    /// `cells` cells per axis. `target_bound` bounds `‖g‖` on the domain.
    pub fn mean_square_deviation(
        domain: Hypercube,
        target: Vec<ScalarFn>,
        target_bound: f64,
        offset: f64,
        weight: f64,
        cells: usize,
        bound: f64,
    ) -> Result<Self> {
        positive("weight", weight)?;
        if cells == 0 {
            return Err(Error::Argument("need at least one quadrature cell".into()));
        }
        let lg = target_lipschitz(&target)?;
        let n = domain.dim();
        let total = cells.checked_pow(n as u32).filter(|&c| c <= 1 << 22).ok_or(Error::Budget {
            what: "quadrature cells",
            required: (cells as u128).saturating_pow(n as u32),
            budget: 1 << 22,
        })?;
        let cell = domain.side / cells as f64;
        let half_diag = cell * (n as f64).sqrt() / 2.0;
        let reach = bound + target_bound;
        let lip = weight * 2.0 * reach;
        Ok(Self::new(
            move |p| {
                let mut out = vec![0.0; p.output_dim];
                let mut x = vec![0.0; n];
                let mut acc = 0.0;
                for k in 0..total {
                    let mut code = k;
                    for (axis, xi) in x.iter_mut().enumerate().rev() {
                        *xi = domain.lo(axis) + (code % cells) as f64 * cell + cell / 2.0;
                        code /= cells;
                    }
                    p.eval_into(&x, &mut out);
                    for (o, g) in out.iter_mut().zip(&target) {
                        *o -= g.eval(&x);
                    }
                    acc += out.iter().map(|o| o * o).sum::<f64>();
                }
                let mean = acc / total as f64;
                let lip_f = 2.0 * reach * (p.vector_lipschitz() + lg);
                let ms = CertifiedReal::estimate(mean, lip_f * half_diag, reach * reach, 2 * total as u32 + 8)
                    .expect("finite policy values");
                CertifiedReal::exact(offset) + ms.scale(weight)
            },
            Modulus::lipschitz(lip.next_up()),
        ))
    }
}
