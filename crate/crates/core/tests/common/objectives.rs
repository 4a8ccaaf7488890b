use std::f64::consts::PI;

use constructa::danskin::{ParametricObjective, ThetaDomain};
use constructa::mesh::Hypercube;
use constructa::{CertifiedReal, Modulus};

pub struct Case {
    pub name: &'static str,
    pub obj: ParametricObjective,
    pub theta: ThetaDomain,
    /// Closed-form `ψ`.
    pub psi: fn(&[f64]) -> f64,
    /// Sample points `x` inside the region where the moduli hold.
    pub points: Vec<Vec<f64>>,
}

fn interval(lo: f64, hi: f64) -> ThetaDomain {
    ThetaDomain::new(Hypercube::interval(lo, hi).unwrap())
}

/// `θx` on `Θ = [−1, 1]`, `|x| ≤ 2`: `ψ = |x|`, kinked at 0.
pub fn tent() -> Case {
    Case {
        name: "tent",
        obj: ParametricObjective::new(
            |x, t| CertifiedReal::estimate(x[0] * t[0], 0.0, x[0] * t[0], 1).unwrap(),
            |_, t| vec![t[0]],
            Modulus::lipschitz(1.0),
            Modulus::lipschitz(2.0),
            Modulus::lipschitz(1.0),
        ),
        theta: interval(-1.0, 1.0),
        psi: |x| x[0].abs(),
        points: vec![vec![0.0], vec![1.0], vec![-0.5]],
    }
}

/// `−(θ − x)²` on `Θ = [−2, 2]`, `|x| ≤ 1`: `ψ ≡ 0`.
pub fn neg_square() -> Case {
    Case {
        name: "neg_square",
        obj: ParametricObjective::new(
            |x, t| {
                let d = t[0] - x[0];
                CertifiedReal::estimate(-d * d, 0.0, d * d, 3).unwrap()
            },
            |x, t| vec![2.0 * (t[0] - x[0])],
            Modulus::lipschitz(6.0),
            Modulus::lipschitz(6.0),
            Modulus::lipschitz(2.0 * 2f64.sqrt()),
        ),
        theta: interval(-2.0, 2.0),
        psi: |_| 0.0,
        points: vec![vec![0.0], vec![0.3], vec![-0.7]],
    }
}

/// `sin θ + x` on `Θ = [0, π]`: `ψ = 1 + x`.
pub fn sine_shift() -> Case {
    Case {
        name: "sine_shift",
        obj: ParametricObjective::new(
            |x, t| CertifiedReal::estimate(t[0].sin() + x[0], 0.0, 1.0 + x[0].abs(), 4).unwrap(),
            |_, _| vec![1.0],
            Modulus::lipschitz(1.0),
            Modulus::lipschitz(1.0),
            Modulus::lipschitz(0.0),
        ),
        theta: interval(0.0, PI),
        psi: |x| 1.0 + x[0],
        points: vec![vec![0.0], vec![0.5]],
    }
}

/// `cos θ·x₁ + sin θ·x₂` on `Θ = [0, 2π]`, `‖x‖ ≤ 2√2`: `ψ = ‖x‖`.
pub fn rotation() -> Case {
    Case {
        name: "rotation",
        obj: ParametricObjective::new(
            |x, t| {
                let v = t[0].cos() * x[0] + t[0].sin() * x[1];
                CertifiedReal::estimate(v, 0.0, x[0].abs() + x[1].abs(), 6).unwrap()
            },
            |_, t| vec![t[0].cos(), t[0].sin()],
            Modulus::lipschitz(1.0),
            Modulus::lipschitz(2.0 * 2f64.sqrt()),
            Modulus::lipschitz(1.0),
        ),
        theta: interval(0.0, 2.0 * PI),
        psi: |x| x[0].hypot(x[1]),
        points: vec![vec![1.0, 0.5], vec![-0.3, 0.8]],
    }
}

/// `θx − θ²/2` on `Θ = [−1, 1]`, `|x| ≤ 2`: `ψ = x²/2` for `|x| ≤ 1`.
pub fn conjugate() -> Case {
    Case {
        name: "conjugate",
        obj: ParametricObjective::new(
            |x, t| CertifiedReal::estimate(t[0] * x[0] - t[0] * t[0] / 2.0, 0.0, 3.0, 4).unwrap(),
            |_, t| vec![t[0]],
            Modulus::lipschitz(1.0),
            Modulus::lipschitz(3.0),
            Modulus::lipschitz(1.0),
        ),
        theta: interval(-1.0, 1.0),
        psi: |x| x[0] * x[0] / 2.0,
        points: vec![vec![0.0], vec![0.6], vec![-0.4]],
    }
}

pub fn all() -> Vec<Case> {
    vec![tent(), neg_square(), sine_shift(), rotation(), conjugate()]
}

/// Directions to probe at a point of dimension `n`.
pub fn directions(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        vec![vec![1.0], vec![-1.0], vec![0.5]]
    } else {
        vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.6, 0.8]]
    }
}
