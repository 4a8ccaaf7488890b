#![allow(dead_code)]

pub mod objectives;

use rand::Rng;

/// Piecewise-linear function on `[0, 1]` with `pieces` random slopes in
/// `[-l, l]`, clipped to `[-k, k]`.
pub struct RandomLipschitz {
    knots: Vec<f64>,
}

impl RandomLipschitz {
    pub fn new<R: Rng>(rng: &mut R, l: f64, k: f64, pieces: usize) -> Self {
        let mut v = if k > 0.0 { rng.gen_range(-k..=k) } else { 0.0 };
        let mut knots = vec![v];
        for _ in 0..pieces {
            let s = if l > 0.0 { rng.gen_range(-l..=l) } else { 0.0 };
            v = (v + s / pieces as f64).clamp(-k, k);
            knots.push(v);
        }
        Self { knots }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len() - 1;
        let t = (x.clamp(0.0, 1.0) * n as f64).min(n as f64 - 1e-12);
        let i = t.floor() as usize;
        let f = t - i as f64;
        self.knots[i] * (1.0 - f) + self.knots[i + 1] * f
    }
}

pub fn grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}
