//! Continuous scalar functions carried together with their continuity data.

use std::fmt;
use std::sync::Arc;

use crate::modulus::Modulus;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(lo, hi)` corners of a box ↦ Lipschitz bound of the function on it.
pub type LocalLipschitzFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A function `ℝⁿ → ℝ` with a global modulus and, optionally, local
/// Lipschitz bounds on boxes.
#[derive(Clone)]
pub struct ScalarFn {
    eval: EvalFn,
    pub modulus: Modulus,
    local_lipschitz: Option<LocalLipschitzFn>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("modulus", &self.modulus)
            .field("local_lipschitz", &self.local_lipschitz.is_some())
            .finish()
    }
}

impl ScalarFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, modulus: Modulus) -> Self {
        Self { eval: Arc::new(f), modulus, local_lipschitz: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, Modulus::lipschitz(0.0))
    }

    pub fn with_local_lipschitz(
        mut self,
        bound: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.local_lipschitz = Some(Arc::new(bound));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Bound on `|f(y) − f(c)|` for `‖y − c‖ ≤ r`.
    pub fn variation_near(&self, c: &[f64], r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if let Some(local) = &self.local_lipschitz {
            let lo: Vec<f64> = c.iter().map(|v| v - r).collect();
            let hi: Vec<f64> = c.iter().map(|v| v + r).collect();
            let l = local(&lo, &hi);
            return crate::modulus::product_up(l, r);
        }
        self.modulus.variation(r, c, r)
    }

    /// `(f(x) − offset) / scale`, with the modulus rescaled accordingly.
    pub fn affine(&self, offset: f64, scale: f64) -> Self {
        let inner = self.eval.clone();
        let inv = 1.0 / scale;
        let local = self.local_lipschitz.clone().map(|l| {
            Arc::new(move |lo: &[f64], hi: &[f64]| l(lo, hi) * inv.abs()) as LocalLipschitzFn
        });
        Self {
            eval: Arc::new(move |x| (inner(x) - offset) * inv),
            modulus: self.modulus.scaled(inv),
            local_lipschitz: local,
        }
    }
}
