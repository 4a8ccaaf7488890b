mod common;

use std::sync::Arc;

use common::{grid, RandomLipschitz};
use constructa::evt::{
    build_policy_net, enumerate_policy_net, epsilon_minimize, epsilon_minimize_with_budget, lipschitz_extend, mollify,
    parse_policy_table, write_policy_table, Functional, PolicyClass, DEFAULT_NET_BUDGET,
};
use constructa::func::ScalarFn;
use constructa::mesh::Hypercube;
use constructa::{Error, Modulus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> Hypercube {
    Hypercube::interval(0.0, 1.0).unwrap()
}

fn class(l: f64, k: f64) -> PolicyClass {
    PolicyClass::new(unit(), 1, l, k).unwrap()
}

fn identity() -> ScalarFn {
    ScalarFn::new(|x| x[0], Modulus::lipschitz(1.0))
}

#[test]
fn net_covers_random_lipschitz_functions() {
    let net = enumerate_policy_net(&class(1.0, 1.0), 1.0).unwrap();
    let xs = grid(513);
    let table: Vec<Vec<f64>> = net.iter().map(|p| xs.iter().map(|&x| p.eval1(&[x])).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let f = RandomLipschitz::new(&mut rng, 1.0, 1.0, 32);
        let fx: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
        let best = table
            .iter()
            .map(|row| row.iter().zip(&fx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1.0, "no member within 1.0 (best {best})");
    }
}

#[test]
fn net_covers_at_finer_precision() {
    let net = enumerate_policy_net(&class(1.0, 1.0), 0.5).unwrap();
    let xs = grid(257);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let f = RandomLipschitz::new(&mut rng, 1.0, 1.0, 16);
        let best = net
            .iter()
            .map(|p| xs.iter().map(|&x| (p.eval1(&[x]) - f.eval(x)).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 0.5, "best {best}");
    }
}

#[test]
fn vector_net_covers_and_members_stay_in_ball() {
    let c = PolicyClass::new(unit(), 2, 1.0, 1.0).unwrap();
    let net = enumerate_policy_net(&c, 1.5).unwrap();
    let xs = grid(65);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for p in &net {
        for &x in &xs {
            let v = p.eval(&[x]);
            assert!((v[0] * v[0] + v[1] * v[1]).sqrt() <= 1.0 + 1e-12);
        }
    }
    for _ in 0..30 {
        // Components scaled so the vector function is 1-Lipschitz and in the unit ball.
        let s = 1.0 / 2f64.sqrt();
        let f = RandomLipschitz::new(&mut rng, s, s, 8);
        let g = RandomLipschitz::new(&mut rng, s, s, 8);
        let best = net
            .iter()
            .map(|p| {
                xs.iter()
                    .map(|&x| {
                        let v = p.eval(&[x]);
                        ((v[0] - f.eval(x)).powi(2) + (v[1] - g.eval(x)).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1.5, "best {best}");
    }
}

#[test]
fn exact_membership_keeps_vector_constant() {
    let c = PolicyClass::new(unit(), 2, 1.0, 1.0).unwrap().with_exact_membership(true);
    let net = build_policy_net(&c, 1.5, DEFAULT_NET_BUDGET).unwrap();
    assert!(net.lipschitz <= 1.0 / 2f64.sqrt() + 1e-15);
    let p = net.member(net.len() / 2);
    assert!(p.vector_lipschitz() <= 1.0 + 1e-12);
}

#[test]
fn degenerate_precision_returns_zero_policy() {
    let net = enumerate_policy_net(&class(1.0, 0.5), 1.0).unwrap();
    assert_eq!(net.len(), 1);
    assert_eq!(net[0].eval1(&[0.7]), 0.0);
}

#[test]
fn sup_norm_example_needs_coarser_precision() {
    let j = Functional::sup_deviation(unit(), vec![ScalarFn::constant(0.0)], 0.0, 1.0, 0.01).unwrap();
    let err = epsilon_minimize(&j, &class(1.0, 1.0), 0.1).unwrap_err();
    assert!(matches!(err, Error::Budget { what: "policy net", .. }));
    let r = epsilon_minimize(&j, &class(1.0, 1.0), 1.0).unwrap();
    assert!(r.value.hi() <= 1.0);
    assert!(r.value.hi() - 1.0 <= 0.0);
}

#[test]
fn sup_norm_on_small_class_certifies_below_precision() {
    // Same functional at ε = 0.1 on a class small enough to enumerate.
    let j = Functional::sup_deviation(unit(), vec![ScalarFn::constant(0.0)], 0.0, 1.0, 0.005).unwrap();
    let r = epsilon_minimize(&j, &class(0.05, 0.1), 0.1).unwrap();
    assert!(r.value.hi() <= 0.1, "{}", r.value);
}

fn brute_force_minimum(j: &Functional, c: &PolicyClass, net_eps: f64) -> (usize, f64) {
    let net = build_policy_net(c, net_eps, DEFAULT_NET_BUDGET).unwrap();
    let mut best = (0, f64::INFINITY);
    for (k, p) in net.members().enumerate() {
        let v = j.eval(&p).value;
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

#[test]
fn quadrature_example_is_net_minimal() {
    let c = class(1.0, 1.0);
    let exact = Functional::mean_square_deviation(unit(), vec![identity()], 1.0, 0.0, 1.0, 64, 1.0).unwrap();
    assert!(matches!(epsilon_minimize(&exact, &c, 0.2), Err(Error::Budget { .. })));

    let scaled = Functional::mean_square_deviation(unit(), vec![identity()], 1.0, 0.0, 0.125, 64, 1.0).unwrap();
    let r = epsilon_minimize(&scaled, &c, 0.5).unwrap();
    assert!(r.value.hi() <= 0.5);
    let (k, v) = brute_force_minimum(&scaled, &c, r.net_precision);
    assert_eq!((k, v), (r.index, r.value.value));
}

#[test]
fn constant_functional_returns_first_member() {
    let r = epsilon_minimize(&Functional::constant(3.5), &class(1.0, 1.0), 0.1).unwrap();
    assert_eq!(r.index, 0);
    assert!((r.value.value - 3.5).abs() <= 0.1);
}

#[test]
fn shrinking_precision_does_not_raise_value_beyond_old_precision() {
    let j = Functional::point_quadratic(vec![0.3], vec![0.4], 0.0, 0.02, 1.0).unwrap();
    let c = class(1.0, 1.0);
    let mut prev: Option<(f64, f64)> = None;
    for eps in [0.2, 0.1, 0.05] {
        let r = epsilon_minimize(&j, &c, eps).unwrap();
        if let Some((v, e)) = prev {
            assert!(r.value.value <= v + e);
        }
        assert!(r.value.hi() - eps <= 0.0);
        prev = Some((r.value.value, eps));
    }
}

#[test]
fn coarse_evaluation_is_rejected() {
    let j = Functional::new(|_| constructa::CertifiedReal::new(0.0, 1.0).unwrap(), Modulus::lipschitz(0.0));
    assert!(matches!(epsilon_minimize(&j, &class(1.0, 1.0), 0.5), Err(Error::Contract(_))));
}

#[test]
fn budget_is_respected() {
    let j = Functional::point_quadratic(vec![0.5], vec![0.0], 0.0, 1.0, 1.0).unwrap();
    let err = epsilon_minimize_with_budget(&j, &class(1.0, 1.0), 1e-9, 10).unwrap_err();
    assert!(matches!(err, Error::Budget { .. }));
}

#[test]
fn mollified_constant_is_constant() {
    let q = lipschitz_extend(&[vec![0.5]], &[vec![0.3]], 0.0).unwrap();
    let mq = mollify(&q, 2, 0.05).unwrap();
    assert!((mq.eval(&[0.2])[0] - 0.3).abs() < 1e-15);
    assert!(mq.eval_certified(&[0.2])[0].contains(0.3));
}

#[test]
fn mollified_absolute_value_at_zero() {
    let w = 0.1;
    let nodes = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let absval = lipschitz_extend(&nodes, &[vec![1.0], vec![0.0], vec![1.0]], 1.0).unwrap();
    // Lower McShane of these data is max(1 − |x+1|, −|x|, 1 − |x−1|) = |x| on [−1, 1].
    for &x in &[-0.7, -0.2, 0.0, 0.3, 0.9] {
        assert!((absval.eval1(&[x]) - f64::abs(x)).abs() < 1e-15);
    }
    let m = mollify(&absval, 2, w).unwrap();
    let c = m.eval_certified(&[0.0])[0];
    assert!(c.lo() > 0.0 && c.hi() <= w, "{c}");
    // Second differences at 0 stay bounded as the step shrinks, unlike |x|.
    let second = |h: f64| (m.eval(&[h])[0] - 2.0 * m.eval(&[0.0])[0] + m.eval(&[-h])[0]) / (h * h);
    assert!(second(1e-2).abs() < 40.0 / w);
}

#[test]
fn mollifier_sup_deviation_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = grid(2001);
    for _ in 0..10 {
        let nodes: Vec<Vec<f64>> = (0..=8).map(|i| vec![i as f64 / 8.0]).collect();
        let f = RandomLipschitz::new(&mut rng, 1.0, 1.0, 8);
        let values: Vec<Vec<f64>> = nodes.iter().map(|x| vec![f.eval(x[0])]).collect();
        let p = lipschitz_extend(&nodes, &values, 1.0).unwrap();
        let m = mollify(&p, 1, 0.01).unwrap();
        let dev = xs.iter().map(|&x| (m.eval(&[x])[0] - p.eval1(&[x])).abs()).fold(0.0, f64::max);
        assert!(dev <= 0.01, "{dev}");
        assert!(m.deviation_bound() <= 0.01 + 1e-15);
    }
}

#[test]
fn policy_table_round_trips_bit_exactly() {
    let net = build_policy_net(&PolicyClass::new(unit(), 2, 1.0, 1.0).unwrap(), 1.5, DEFAULT_NET_BUDGET).unwrap();
    let p = net.member(net.len() / 3);
    let text = write_policy_table(&p);
    let q = parse_policy_table(&text).unwrap();
    assert_eq!(p.values, q.values);
    assert_eq!(p.nodes.parent, q.nodes.parent);
    assert_eq!(p.nodes.points().collect::<Vec<_>>(), q.nodes.points().collect::<Vec<_>>());
    assert_eq!(p.lipschitz.to_bits(), q.lipschitz.to_bits());
    assert_eq!(p.nodes.resolution.to_bits(), q.nodes.resolution.to_bits());
    assert_eq!(write_policy_table(&q), text);

    let odd = lipschitz_extend(&[vec![0.1], vec![1.0 / 3.0]], &[vec![1e-300], vec![0.1 + 0.2]], 3.0).unwrap();
    let back = parse_policy_table(&write_policy_table(&odd)).unwrap();
    assert_eq!(odd.values, back.values);
    assert_eq!(back.bound, f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extension_agrees_at_nodes_and_respects_constant(seed in any::<u64>(), n in 1usize..8, m in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rng.gen_range(0.1..3.0);
        let nodes: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        // Values sampled from L-Lipschitz functions: a_j + L·(b_j·x)/‖b_j‖.
        let dirs: Vec<(f64, f64, f64)> = (0..m).map(|_| {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = (a * a + b * b).sqrt().max(1e-9);
            (rng.gen_range(-1.0..1.0), a / s, b / s)
        }).collect();
        let values: Vec<Vec<f64>> = nodes.iter().map(|x| dirs.iter().map(|(c, a, b)| c + l * (a * x[0] + b * x[1])).collect()).collect();
        let p = lipschitz_extend(&nodes, &values, l).unwrap();
        for (x, v) in nodes.iter().zip(&values) {
            for (got, want) in p.eval(x).iter().zip(v) {
                prop_assert!((got - want).abs() <= 4.0 * f64::EPSILON * (1.0 + want.abs()));
            }
        }
        let sm = (m as f64).sqrt();
        for _ in 0..50 {
            let x: [f64; 2] = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let y: [f64; 2] = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            let (fx, fy) = (p.eval(&x), p.eval(&y));
            let mut dv = 0.0;
            for j in 0..m {
                let dj = (fx[j] - fy[j]).abs();
                prop_assert!(dj <= l * d * (1.0 + 1e-12) + 1e-14);
                dv += dj * dj;
            }
            prop_assert!(dv.sqrt() <= l * sm * d * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn net_members_respect_class_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rng.gen_range(0.2..2.0);
        let k = rng.gen_range(0.2..1.5);
        let c = class(l, k);
        let net = build_policy_net(&c, 1.0, DEFAULT_NET_BUDGET).unwrap();
        let p = net.member(rng.gen_range(0..net.len()));
        let nodes = Arc::clone(&p.nodes);
        for _ in 0..50 {
            let x = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            prop_assert!(p.eval1(&[x]).abs() <= k);
            prop_assert!((p.eval1(&[x]) - p.eval1(&[y])).abs() <= l * (x - y).abs() * (1.0 + 1e-12) + 1e-15);
        }
        prop_assert!(nodes.len() >= 1);
    }
}
