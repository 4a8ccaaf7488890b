mod common;

use common::objectives::{self, directions};
use constructa::danskin::{
    delta_optimizers, directional_derivative, finite_difference_audit, psi, psi_modulus, ParametricObjective, ThetaDomain,
};
use constructa::mesh::Hypercube;
use constructa::{CertifiedReal, Modulus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AUDIT_STEPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[test]
fn psi_matches_closed_forms() {
    for case in objectives::all() {
        for x in &case.points {
            for eps in [0.1, 0.01] {
                let r = psi(&case.obj, &case.theta, x, eps).unwrap();
                assert!(r.radius <= eps, "{}: radius {}", case.name, r.radius);
                assert!(r.contains((case.psi)(x)), "{} at {x:?}: {r} vs {}", case.name, (case.psi)(x));
            }
        }
    }
}

#[test]
fn psi_agrees_with_dense_oracle() {
    let case = objectives::sine_shift();
    let eps = 0.01;
    let oracle = |x: f64| {
        let n = (std::f64::consts::PI / (eps / 10.0)).ceil() as usize;
        (0..=n).map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin() + x).fold(f64::MIN, f64::max)
    };
    for x in [0.0, 0.25, -0.5] {
        let r = psi(&case.obj, &case.theta, &[x], eps).unwrap();
        assert!((r.value - oracle(x)).abs() <= eps);
    }
}

#[test]
fn delta_set_examples() {
    let tent = objectives::tent();
    let s = delta_optimizers(&tent.obj, &tent.theta, &[1.0], 0.1, 0.01).unwrap();
    let slack = 0.01;
    assert!(s.points.iter().all(|t| t[0] >= 0.9 - slack));

    let full = delta_optimizers(&tent.obj, &tent.theta, &[1.0], 5.0, 0.01).unwrap();
    assert_eq!(full.points.len(), full.mesh_size);

    let flat = ParametricObjective::new(
        |x, _| CertifiedReal::exact(x[0]),
        |_, _| vec![1.0],
        Modulus::lipschitz(1.0),
        Modulus::lipschitz(1.0),
        Modulus::lipschitz(0.0),
    );
    let s = delta_optimizers(&flat, &tent.theta, &[0.2], 1e-9, 0.01).unwrap();
    assert_eq!(s.points.len(), s.mesh_size);
    assert!(s.mesh_size > 1);
}

#[test]
fn derivative_examples() {
    let tent = objectives::tent();
    for delta in [0.5, 0.1, 0.01] {
        let d = directional_derivative(&tent.obj, &tent.theta, &[0.0], &[1.0], delta).unwrap();
        assert!((d.value.value - 1.0).abs() <= delta + d.value.radius, "{}", d.value);
    }
    let sq = objectives::neg_square();
    for v in [1.0, -2.0, 0.3] {
        let d = directional_derivative(&sq.obj, &sq.theta, &[0.1], &[v], 0.01).unwrap();
        assert!(d.value.value.abs() <= 0.01 + d.spread_slack + d.value.radius, "{}", d.value);
    }
    let d = directional_derivative(&sq.obj, &sq.theta, &[0.1], &[0.0], 0.01).unwrap();
    assert_eq!(d.value, CertifiedReal::exact(0.0));
}

#[test]
fn member_spread_within_delta_plus_slack() {
    for case in objectives::all() {
        for x in &case.points {
            for v in directions(x.len()) {
                for delta in [0.2, 0.05, 0.01] {
                    let d = directional_derivative(&case.obj, &case.theta, x, &v, delta).unwrap();
                    assert!(
                        d.spread <= delta + d.spread_slack + 2.0 * d.value.radius,
                        "{} x={x:?} v={v:?} δ={delta}: spread {} slack {}",
                        case.name,
                        d.spread,
                        d.spread_slack
                    );
                }
            }
        }
    }
}

#[test]
fn audit_quotients_are_sandwiched() {
    for case in objectives::all() {
        for x in &case.points {
            for v in directions(x.len()) {
                let delta = 0.1;
                let rep = finite_difference_audit(&case.obj, &case.theta, x, &v, delta, &AUDIT_STEPS).unwrap();
                for row in &rep.rows {
                    assert!(row.sandwiched(), "{} x={x:?} v={v:?}: {row:?}", case.name);
                }
                assert!(rep.rows.iter().filter(|r| r.upper_valid).count() >= 2, "{}", case.name);
            }
        }
    }
}

#[test]
fn audit_examples() {
    let tent = objectives::tent();
    let smooth = finite_difference_audit(&tent.obj, &tent.theta, &[1.0], &[1.0], 0.1, &AUDIT_STEPS).unwrap();
    let last = smooth.rows.last().unwrap();
    assert!((last.quotient.value - 1.0).abs() < 1e-3);

    let kink = finite_difference_audit(&tent.obj, &tent.theta, &[0.0], &[1.0], 0.1, &AUDIT_STEPS).unwrap();
    for row in &kink.rows {
        assert!((row.quotient.value - 1.0).abs() <= row.quotient.radius + 1e-3, "{row:?}");
    }

    let constant = ParametricObjective::new(
        |_, _| CertifiedReal::exact(2.5),
        |_, _| vec![0.0],
        Modulus::lipschitz(0.0),
        Modulus::lipschitz(0.0),
        Modulus::lipschitz(0.0),
    );
    let rep = finite_difference_audit(&constant, &tent.theta, &[0.4], &[1.0], 0.1, &AUDIT_STEPS).unwrap();
    assert!(rep.rows.iter().all(|r| r.quotient.value == 0.0));
    let csv = rep.to_csv();
    assert!(csv.starts_with("h,quotient,"));
    assert_eq!(csv.lines().count(), 1 + AUDIT_STEPS.len());
}

#[test]
fn audit_rejects_bad_steps() {
    let tent = objectives::tent();
    assert!(finite_difference_audit(&tent.obj, &tent.theta, &[0.0], &[1.0], 0.1, &[0.01, 0.1]).is_err());
    assert!(finite_difference_audit(&tent.obj, &tent.theta, &[0.0], &[1.0], 0.1, &[0.0]).is_err());
}

#[test]
fn psi_inherits_x_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in [objectives::tent(), objectives::conjugate()] {
        let m = psi_modulus(&case.obj);
        for _ in 0..1000 {
            let x = rng.gen_range(-1.0..1.0);
            let y = rng.gen_range(-1.0..1.0);
            let (px, py) = (psi(&case.obj, &case.theta, &[x], 0.02).unwrap(), psi(&case.obj, &case.theta, &[y], 0.02).unwrap());
            let diff = (px.value - py.value).abs();
            assert!(diff <= m.global_variation((x - y).abs()) + px.radius + py.radius);
        }
    }
}

#[test]
fn psi_modulus_examples() {
    let abs_theta = ParametricObjective::new(
        |x, t| CertifiedReal::exact(x[0].abs() * t[0]),
        |x, t| vec![x[0].signum() * t[0]],
        Modulus::lipschitz(1.0),
        Modulus::lipschitz(1.0),
        Modulus::lipschitz(1.0),
    );
    let unit = ThetaDomain::new(Hypercube::interval(0.0, 1.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let (x, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (a, b) = (psi(&abs_theta, &unit, &[x], 1e-3).unwrap(), psi(&abs_theta, &unit, &[y], 1e-3).unwrap());
        assert!((a.value - b.value).abs() <= (x - y).abs() + a.radius + b.radius);
    }
    let x_free = ParametricObjective::new(
        |_, t| CertifiedReal::exact(t[0]),
        |_, _| vec![0.0],
        Modulus::lipschitz(0.0),
        Modulus::lipschitz(1.0),
        Modulus::lipschitz(0.0),
    );
    let (a, b) = (psi(&x_free, &unit, &[0.0], 1e-3).unwrap(), psi(&x_free, &unit, &[5.0], 1e-3).unwrap());
    assert_eq!(a.value, b.value);
    assert!(psi_modulus(&x_free).global_variation(3.0) <= f64::MIN_POSITIVE);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn delta_sets_nest(x in -1.0f64..1.0, d1 in 0.001f64..0.5, d2 in 0.001f64..0.5) {
        let case = objectives::conjugate();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = delta_optimizers(&case.obj, &case.theta, &[x], lo, 0.01).unwrap();
        let b = delta_optimizers(&case.obj, &case.theta, &[x], hi, 0.01).unwrap();
        prop_assert!(a.indices.iter().all(|i| b.indices.contains(i)));
        prop_assert!(!a.points.is_empty());
    }
}
