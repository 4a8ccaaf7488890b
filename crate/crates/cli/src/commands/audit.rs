//! Seeded property suite over every module. Each check draws its cases from
//! its own stream so that adding cases to one check leaves the others
//! unchanged.

use constructa::danskin::{finite_difference_audit, ParametricObjective, ThetaDomain};
use constructa::eigen::{approx_eigenpairs, hurwitz_verdict, ComplexMatrix, Verdict as Hurwitz};
use constructa::evt::{epsilon_minimize, Functional, PolicyClass};
use constructa::forms::FnForm;
use constructa::func::ScalarFn;
use constructa::selector::{extract_selector_with_budget, Block, Chunk, RegularSVF, SvfPiece};
use constructa::trajectories::{picard_solve, RegularRHS, RhsPiece};
use constructa::{Hypercube, Modulus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde::Serialize;
use serde_json::json;

use super::{certify, shh};
use crate::config::{parse, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct AuditConfig {
    /// Multiplies the number of randomized cases per check.
    #[serde(default = "one")]
    scale: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize)]
struct Check {
    module: &'static str,
    check: &'static str,
    cases: usize,
    passed: usize,
    /// Largest excess over the allowed bound; non-positive when all pass.
    worst: f64,
}

impl Check {
    fn new(module: &'static str, check: &'static str) -> Self {
        Self { module, check, cases: 0, passed: 0, worst: f64::NEG_INFINITY }
    }

    fn record(&mut self, excess: f64) {
        self.cases += 1;
        if excess <= 0.0 {
            self.passed += 1;
        }
        self.worst = self.worst.max(excess);
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    fn ok(&self) -> bool {
        self.cases > 0 && self.passed == self.cases
    }
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn evt(seed: u64, n: usize) -> Result<Check, CliError> {
    let mut c = Check::new("evt", "epsilon_minimize_below_infimum");
    let mut rng = stream(seed, 1);
    let class = PolicyClass::new(Hypercube::interval(0.0, 1.0)?, 1, 1.0, 1.0)?;
    let eps = 0.05;
    for _ in 0..n {
        let x0 = rng.gen_range(0.0..=1.0);
        let a = rng.gen_range(-0.9..=0.9);
        let offset = rng.gen_range(-1.0..=1.0);
        let weight = rng.gen_range(0.01..=0.016);
        // The infimum is `offset`, attained by the constant policy `a`.
        let j = Functional::point_quadratic(vec![x0], vec![a], offset, weight, 1.0)?;
        let r = epsilon_minimize(&j, &class, eps)?;
        c.record((r.value.lo() - eps - offset).max(offset - r.value.hi()));
    }
    Ok(c)
}

fn danskin(seed: u64, n: usize) -> Result<Check, CliError> {
    let mut c = Check::new("danskin", "difference_quotients_sandwiched");
    let mut rng = stream(seed, 2);
    // φ(x, θ) = θx, so ψ(x) = |x|.
    let tent = FnForm::Product {
        factors: vec![FnForm::Polynomial { var: 0, coeffs: vec![0.0, 1.0] }, FnForm::Polynomial { var: 1, coeffs: vec![0.0, 1.0] }],
    };
    let x_box = Hypercube::interval(-1.0, 1.0)?;
    let theta = ThetaDomain::new(Hypercube::interval(-1.0, 1.0)?);
    let obj = ParametricObjective::from_form(tent, &x_box, &theta, 1.0)?;
    for k in 0..n {
        let x = if k == 0 { 0.0 } else { rng.gen_range(-0.5..=0.5) };
        let v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let report = finite_difference_audit(&obj, &theta, &[x], &[v], 0.1, &[1e-1, 1e-2])?;
        c.flag(report.rows.iter().all(|r| r.sandwiched()));
    }
    Ok(c)
}

fn selector(seed: u64, n: usize) -> Result<Check, CliError> {
    let mut c = Check::new("selector", "distance_and_exception_budget");
    let mut rng = stream(seed, 3);
    let eps = 0.05;
    let budget = 0.01;
    for _ in 0..n {
        let a = rng.gen_range(-1.0..=1.0);
        let s: f64 = rng.gen_range(-1.0..=1.0);
        let w = rng.gen_range(0.0..=0.5);
        let lower = ScalarFn::new(move |x| a + s * x[0], Modulus::lipschitz(s.abs()));
        let upper = ScalarFn::new(move |x| a + w + s * x[0], Modulus::lipschitz(s.abs()));
        let block = Block::interval(0.0, 1.0)?;
        let f = RegularSVF::new(block.clone(), vec![SvfPiece { block, chunks: vec![Chunk::new(lower, upper)] }])?;
        let sel = extract_selector_with_budget(&f, eps, budget)?;
        let mut worst = sel.exception_volume() - budget;
        if !sel.is_proper() {
            worst = worst.max(1.0);
        }
        for _ in 0..200 {
            let x = [rng.gen_range(0.0..=1.0)];
            if let Some(d) = sel.eval(&x).and_then(|y| f.distance(&x, y)) {
                worst = worst.max(d - eps);
            }
        }
        c.record(worst);
    }
    Ok(c)
}

fn eigen(seed: u64, n: usize) -> Result<(Check, Check), CliError> {
    let mut res = Check::new("eigen", "residuals_below_eps");
    let mut rng = stream(seed, 4);
    let eps = 1e-8;
    for _ in 0..n {
        let dim = rng.gen_range(2..=5);
        let data: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let dec = approx_eigenpairs(&ComplexMatrix::from_real(dim, &data)?, eps)?;
        let worst = dec.pairs.iter().map(|p| p.residual.hi() - eps).fold(f64::NEG_INFINITY, f64::max);
        res.record(if dec.success { worst } else { 1.0 });
    }
    let mut hur = Check::new("eigen", "hurwitz_matches_trace_determinant");
    while hur.cases < n {
        let m: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let (tr, det) = (m[0] + m[3], m[0] * m[3] - m[1] * m[2]);
        if tr.abs() < 1e-2 || det.abs() < 1e-2 {
            continue;
        }
        let expected = if tr < 0.0 && det > 0.0 { Hurwitz::Stable } else { Hurwitz::Unstable };
        let hv = hurwitz_verdict(&ComplexMatrix::from_real(2, &m)?, 1e-10)?;
        hur.flag(hv.verdict == expected);
    }
    Ok((res, hur))
}

fn ode(seed: u64, n: usize) -> Result<Check, CliError> {
    let mut c = Check::new("trajectories", "linear_endpoint_within_bound");
    let mut rng = stream(seed, 5);
    for _ in 0..n {
        let a = rng.gen_range(-2.0..=1.0);
        let x0 = rng.gen_range(-0.5..=0.5);
        let piece = RhsPiece::autonomous(move |x, out| out[0] = a * x[0], f64::abs(a));
        let rhs = RegularRHS::single(1, piece, 1.0, Hypercube::interval(-2.0, 2.0)?)?;
        let sol = picard_solve(&rhs, &[x0], 1.0, 1e-5)?;
        c.record((sol.endpoint()[0] - x0 * a.exp()).abs() - sol.error_bound.hi());
    }
    Ok(c)
}

const STABLE: &str = r#"
dim = 1
state_box = { lo = -1.0, hi = 1.0 }
v = { kind = "polynomial", coeffs = [0.0, 0.0, 1.0] }
w1 = { kind = "polynomial", coeffs = [0.0, 0.0, 0.5] }
w2 = { kind = "norm", vars = [0], scale = 2.0 }
w3 = { kind = "polynomial", coeffs = [0.0, 0.0, 1.0] }
xi = 1.0
mesh_eps = 1e-3
trajectories = 20
"#;

fn stability(ctx: &RunContext) -> Result<Check, CliError> {
    let mut c = Check::new("stability", "certify_decides_linear_systems");
    let stable = format!(
        "{STABLE}vdot = {{ kind = \"polynomial\", coeffs = [0.0, 0.0, -2.0] }}\ndynamics = [{{ kind = \"polynomial\", coeffs = [0.0, -1.0] }}]\n"
    );
    let unstable = format!("{STABLE}vdot = {{ kind = \"polynomial\", coeffs = [0.0, 0.0, 2.0] }}\n");
    c.flag(certify::run(&stable, ctx)?.verdict == Verdict::Certified);
    c.flag(certify::run(&unstable, ctx)?.verdict == Verdict::Counterexample);
    Ok(c)
}

const INTEGRATOR: &str = r#"
dim = 1
control_dim = 1
state_box = { lo = -1.0, hi = 1.0 }
control_box = { lo = -1.0, hi = 1.0 }
dynamics = [{ kind = "polynomial", var = 1, coeffs = [0.0, 1.0] }]
x0 = [0.9]

[clf]
v = { kind = "polynomial", coeffs = [0.0, 0.0, 1.0] }
gradient = [{ kind = "polynomial", coeffs = [0.0, 2.0] }]
target_radius = 0.1
overshoot = 1.0
feedback_eps = 0.01
eta_max = 1.0
annulus_eps = 0.01
"#;

fn sample_hold(ctx: &RunContext) -> Result<Check, CliError> {
    let mut c = Check::new("stability", "integrator_sampling_time");
    c.flag(shh::run(INTEGRATOR, ctx)?.verdict == Verdict::Certified);
    Ok(c)
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: AuditConfig = if text.trim().is_empty() { AuditConfig { scale: 1 } } else { parse(text)? };
    if cfg.scale == 0 {
        return Err(CliError::Config("scale must be at least 1".into()));
    }
    let s = cfg.scale;
    let inner = RunContext { seed: ctx.seed, precision_audit: false, config_dir: ctx.config_dir.clone() };
    let (residuals, hurwitz) = eigen(ctx.seed, 50 * s)?;
    let checks = vec![
        evt(ctx.seed, 10 * s)?,
        danskin(ctx.seed, 5 * s)?,
        selector(ctx.seed, 5 * s)?,
        residuals,
        hurwitz,
        ode(ctx.seed, 10 * s)?,
        stability(&inner)?,
        sample_hold(&inner)?,
    ];
    let mut csv = String::from("module,check,cases,passed,worst\n");
    for k in &checks {
        csv += &format!("{},{},{},{},{:?}\n", k.module, k.check, k.cases, k.passed, k.worst);
    }
    let all = checks.iter().all(Check::ok);
    let verdict = if all { Verdict::Success } else { Verdict::Failure };
    let fields = json!({ "all_passed": all, "checks": checks });
    Ok(Outcome::new(verdict, fields).file("audit.csv", csv))
}
