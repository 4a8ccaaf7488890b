use constructa::forms::FnForm;
use constructa::stability::{audit_vdot, certify, CertificateVerdict, CheckConfig, LyapunovData, StrictIncreaseWitness, TimeFn};
use constructa::trajectories::{picard_solve, RegularRHS, RhsPiece};
use constructa::Modulus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use super::csv_line;
use crate::config::{check_arity, corners, joint, parse, positive, scalar_fn, sup_lipschitz, with_args, BoxSpec, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyConfig {
    dim: usize,
    state_box: BoxSpec,
    /// `V` over `[x.., t]`.
    v: FnForm,
    /// `∂V/∂t + ⟨∇V, f⟩` over `[x.., t]`.
    vdot: FnForm,
    w1: FnForm,
    w2: FnForm,
    w3: FnForm,
    /// Coefficients `a_k` of `w_i(x) = Σ a_k ‖x‖^k`, when the witness cannot
    /// be read off the form.
    nu1: Option<Vec<f64>>,
    nu2: Option<Vec<f64>>,
    nu3: Option<Vec<f64>>,
    xi: f64,
    mesh_eps: f64,
    #[serde(default = "default_t_samples")]
    t_samples: Vec<f64>,
    inner_radius: Option<f64>,
    /// `f` over `[x.., t]`; enables the derivative audit and the trajectory
    /// spot check.
    dynamics: Option<Vec<FnForm>>,
    #[serde(default = "default_trajectories")]
    trajectories: usize,
    #[serde(default = "default_horizon")]
    trajectory_horizon: f64,
    #[serde(default = "default_solver_eps")]
    solver_eps: f64,
}

fn default_t_samples() -> Vec<f64> {
    vec![0.0]
}

fn default_trajectories() -> usize {
    20
}

fn default_horizon() -> f64 {
    2.0
}

fn default_solver_eps() -> f64 {
    1e-4
}

fn witness(name: &str, form: &FnForm, coeffs: &Option<Vec<f64>>, dim: usize) -> Result<StrictIncreaseWitness, CliError> {
    match coeffs {
        Some(c) => Ok(StrictIncreaseWitness::radial_polynomial(c.clone())?),
        None => StrictIncreaseWitness::from_form(form, dim).ok_or_else(|| {
            CliError::Config(format!("{name} is not a recognized radial form; give {} coefficients", name.replace('w', "nu")))
        }),
    }
}

fn time_fn(form: &FnForm, n: usize, t_lo: f64, t_hi: f64) -> TimeFn {
    let eval = form.clone();
    let (space, time) = (form.clone(), form.clone());
    TimeFn::new(move |x, t| with_args(x, &[t], |arg| eval.eval(arg)))
    .with_space_lipschitz(move |lo, hi| {
        let (a, b) = joint(&[(lo, hi), (&[t_lo], &[t_hi])]);
        space.partial_lipschitz(&a, &b, 0..n)
    })
    .with_time_lipschitz(move |lo, hi| {
        let (a, b) = joint(&[(lo, hi), (&[t_lo], &[t_hi])]);
        time.partial_lipschitz(&a, &b, n..n + 1)
    })
}

fn vector_field(forms: Vec<FnForm>) -> impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + Clone + 'static {
    move |x: &[f64], t: f64, out: &mut [f64]| {
        with_args(x, &[t], |arg| {
            for (o, f) in out.iter_mut().zip(&forms) {
                *o = f.eval(arg);
            }
        })
    }
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: CertifyConfig = parse(text)?;
    let n = cfg.dim;
    positive("mesh_eps", cfg.mesh_eps)?;
    if cfg.t_samples.is_empty() {
        return Err(CliError::Config("t_samples must not be empty".into()));
    }
    let cube = cfg.state_box.cube()?;
    if cube.dim() != n {
        return Err(CliError::Config("state_box must match dim".into()));
    }
    for (name, f) in [("v", &cfg.v), ("vdot", &cfg.vdot)] {
        check_arity(name, f, n + 1)?;
    }
    let t_lo = cfg.t_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let t_hi = cfg.t_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = corners(&cube);
    let nu = [
        witness("w1", &cfg.w1, &cfg.nu1, n)?,
        witness("w2", &cfg.w2, &cfg.nu2, n)?,
        witness("w3", &cfg.w3, &cfg.nu3, n)?,
    ];
    let data = LyapunovData::new(
        cube.clone(),
        time_fn(&cfg.v, n, t_lo, t_hi),
        time_fn(&cfg.vdot, n, t_lo, t_hi),
        scalar_fn("w1", &cfg.w1, &lo, &hi)?,
        scalar_fn("w2", &cfg.w2, &lo, &hi)?,
        scalar_fn("w3", &cfg.w3, &lo, &hi)?,
        nu,
        cfg.xi,
    )?;
    let mut check = CheckConfig::new(cfg.mesh_eps, cfg.t_samples.clone());
    if let Some(r) = cfg.inner_radius {
        check = check.with_inner_radius(r);
    }
    let cert = certify(&data, &check)?;
    let mut verdict = match cert.verdict {
        CertificateVerdict::Certified => Verdict::Certified,
        CertificateVerdict::Counterexample => Verdict::Counterexample,
        CertificateVerdict::Undecided => Verdict::Undecided,
    };
    let mut fields = json!({
        "verdict": cert.verdict,
        "mesh_eps": cert.mesh_eps,
        "inner_radius": cert.inner_radius,
        "t_range": [cert.t_range.0, cert.t_range.1],
        "sandwich": cert.sandwich,
        "decay": cert.decay,
        "growth": cert.growth,
        "region": cert.region,
        "suggested_eps": cert.suggested_eps,
    });
    let mut out = Outcome::new(verdict, serde_json::Value::Null);

    if let Some(dynamics) = &cfg.dynamics {
        if dynamics.len() != n {
            return Err(CliError::Config(format!("dynamics needs {n} forms")));
        }
        for f in dynamics {
            check_arity("dynamics", f, n + 1)?;
        }
        let f = vector_field(dynamics.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let probes: Vec<Vec<f64>> =
            (0..32).map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect()).collect();
        fields["vdot_audit_error"] = json!(audit_vdot(&data, f.clone(), &probes, &cfg.t_samples));

        if let Some(region) = &cert.region {
            positive("trajectory_horizon", cfg.trajectory_horizon)?;
            positive("solver_eps", cfg.solver_eps)?;
            let (blo, bhi) = joint(&[(&lo, &hi), (&[0.0], &[cfg.trajectory_horizon])]);
            let lx = sup_lipschitz(dynamics, &blo, &bhi, 0..n);
            let lt = sup_lipschitz(dynamics, &blo, &bhi, n..n + 1);
            let lv = cfg.v.partial_lipschitz(&blo, &bhi, 0..n);
            let rhs = RegularRHS::single(n, RhsPiece::new(f, lx, Modulus::lipschitz(lt)), cfg.trajectory_horizon, cube.clone())?;
            let starts: Vec<Vec<f64>> = (0..cfg.trajectories)
                .map(|_| loop {
                    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-region.radius..=region.radius)).collect();
                    if p.iter().map(|v| v * v).sum::<f64>().sqrt() <= region.radius {
                        break p;
                    }
                })
                .collect();
            let runs = starts
                .par_iter()
                .map(|x0| {
                    let sol = picard_solve(&rhs, x0, cfg.trajectory_horizon, cfg.solver_eps)?;
                    let allowed = 2.0 * lv * sol.error_bound.hi();
                    let vs: Vec<f64> = (0..sol.len()).map(|i| data.v.eval(sol.state(i), sol.grid[i])).collect();
                    let worst = vs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                    Ok([vs[0], vs[vs.len() - 1], worst, allowed])
                })
                .collect::<Result<Vec<_>, constructa::Error>>()?;
            let mut table = String::from("run,t_end,v_start,v_end,worst_increase,allowed\n");
            let mut monotone = true;
            for (k, [v0, v1, worst, allowed]) in runs.into_iter().enumerate() {
                monotone &= worst <= allowed;
                table += &csv_line(&[k as f64, cfg.trajectory_horizon, v0, v1, worst, allowed]);
            }
            fields["trajectories_monotone"] = json!(monotone);
            if !monotone {
                verdict = Verdict::Failure;
            }
            out = out.file("certify_trajectories.csv", table);
        }
    }
    out.verdict = verdict;
    out.fields = fields;
    out = out.payload(json!({ "counterexample": cert.counterexample }));

    if ctx.precision_audit {
        let fine = certify(&data, &CheckConfig { mesh_eps: cfg.mesh_eps / 2.0, ..check.clone() })?;
        // A certificate on the coarse mesh must not meet a counterexample on
        // the finer one.
        let consistent = !(cert.verdict == CertificateVerdict::Certified && fine.verdict == CertificateVerdict::Counterexample);
        out = out.audit(Some(json!({ "mesh_eps": cfg.mesh_eps / 2.0, "verdict": fine.verdict, "consistent": consistent })));
    }
    Ok(out)
}
