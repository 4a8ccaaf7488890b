//! Fixed problem instances shared by the benchmarks.

use constructa::eigen::ComplexMatrix;
use constructa::evt::{Functional, PolicyClass};
use constructa::func::ScalarFn;
use constructa::selector::{Block, Chunk, RegularSVF, SvfPiece};
use constructa::stability::{LyapunovData, StrictIncreaseWitness, TimeFn};
use constructa::trajectories::{RegularRHS, RhsPiece};
use constructa::{Hypercube, Modulus};

/// A dense real `n×n` matrix with deterministic, well-spread entries.
pub fn matrix(n: usize) -> ComplexMatrix {
    let data: Vec<f64> = (0..n * n).map(|k| ((k * 7919 + 13) % 101) as f64 / 50.0 - 1.0).collect();
    ComplexMatrix::from_real(n, &data).unwrap()
}

/// `ẋ = −x` on `[−10, 10]`.
pub fn decay() -> RegularRHS {
    let piece = RhsPiece::autonomous(|x, o| o[0] = -x[0], 1.0);
    RegularRHS::single(1, piece, 1.0, Hypercube::new(vec![0.0], 20.0).unwrap()).unwrap()
}

/// Scalar `1`-Lipschitz policies on `[0, 1]` bounded by `1`, with a
/// point functional whose net at `eps = 0.05` has 3013 members.
pub fn evt_problem() -> (PolicyClass, Functional) {
    let class = PolicyClass::new(Hypercube::interval(0.0, 1.0).unwrap(), 1, 1.0, 1.0).unwrap();
    let j = Functional::point_quadratic(vec![0.5], vec![0.2], 0.0, 0.015, 1.0).unwrap();
    (class, j)
}

/// Two crossing bands over `[0, 1]`.
pub fn crossing_svf() -> RegularSVF {
    let line = |s: f64, c: f64| ScalarFn::new(move |x| s * x[0] + c, Modulus::lipschitz(s.abs()));
    let block = Block::interval(0.0, 1.0).unwrap();
    let chunks = vec![Chunk::new(line(1.0, 0.0), line(1.0, 0.1)), Chunk::new(line(-1.0, 1.0), line(-1.0, 1.1))];
    RegularSVF::new(block.clone(), vec![SvfPiece { block, chunks }]).unwrap()
}

fn square(c: f64) -> ScalarFn {
    ScalarFn::new(move |x| c * x[0] * x[0], Modulus::lipschitz(2.0 * c))
        .with_local_lipschitz(move |lo, hi| 2.0 * c * lo[0].abs().max(hi[0].abs()))
}

/// `V = x²` for `ẋ = −x` on `[−1, 1]`.
pub fn lyapunov_decay() -> LyapunovData {
    let abs2 = ScalarFn::new(|x| 2.0 * x[0].abs(), Modulus::lipschitz(2.0));
    let vdot = TimeFn::new(|x, _| -2.0 * x[0] * x[0])
        .with_space_lipschitz(|lo, hi| 4.0 * lo[0].abs().max(hi[0].abs()))
        .with_time_lipschitz(|_, _| 0.0);
    let radial = |c: f64, p: usize| {
        let mut coeffs = vec![0.0; p + 1];
        coeffs[p] = c;
        StrictIncreaseWitness::radial_polynomial(coeffs).unwrap()
    };
    LyapunovData::new(
        Hypercube::interval(-1.0, 1.0).unwrap(),
        TimeFn::autonomous(square(1.0)),
        vdot,
        square(0.5),
        abs2,
        square(1.0),
        [radial(0.5, 2), radial(2.0, 1), radial(1.0, 2)],
        1.0,
    )
    .unwrap()
}
