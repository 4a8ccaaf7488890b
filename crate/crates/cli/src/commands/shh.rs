use std::sync::Arc;

use constructa::forms::FnForm;
use constructa::stability::{clf_feedback, find_sampling_time, CLFProblem, SamplingOutcome, DEFAULT_MESH_BUDGET};
use constructa::trajectories::{sample_hold_trajectory, ControlSystem, SampleHoldPolicy};
use serde::Deserialize;
use serde_json::json;

use crate::config::{check_arity, corners, flow_bound, joint, parse, positive, round_up, scalar_fn, sup_lipschitz, with_args, BoxSpec, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShhConfig {
    dim: usize,
    control_dim: usize,
    state_box: BoxSpec,
    control_box: BoxSpec,
    /// One form per state component over `[x.., u..]`.
    dynamics: Vec<FnForm>,
    clf: ClfConfig,
    /// Closed-loop run from this state; skipped when absent.
    x0: Option<Vec<f64>>,
    /// Defaults to the horizon of the sampling certificate.
    horizon: Option<f64>,
    #[serde(default = "default_solver_eps")]
    solver_eps: f64,
    #[serde(default = "default_stride")]
    csv_stride: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClfConfig {
    v: FnForm,
    /// `∇V`, one form per state component over `[x..]`.
    gradient: Vec<FnForm>,
    target_radius: f64,
    overshoot: f64,
    feedback_eps: f64,
    eta_max: f64,
    annulus_eps: f64,
}

fn default_solver_eps() -> f64 {
    1e-6
}

fn default_stride() -> usize {
    1
}

fn problem(cfg: &ShhConfig) -> Result<CLFProblem, CliError> {
    let (n, m) = (cfg.dim, cfg.control_dim);
    let xb = cfg.state_box.cube()?;
    let ub = cfg.control_box.cube()?;
    if xb.dim() != n || ub.dim() != m || cfg.dynamics.len() != n || cfg.clf.gradient.len() != n {
        return Err(CliError::Config("state_box, dynamics and gradient must match dim; control_box must match control_dim".into()));
    }
    for f in &cfg.dynamics {
        check_arity("dynamics", f, n + m)?;
    }
    for g in &cfg.clf.gradient {
        check_arity("gradient", g, n)?;
    }
    let (xlo, xhi) = corners(&xb);
    let (ulo, uhi) = corners(&ub);
    let (lo, hi) = joint(&[(&xlo, &xhi), (&ulo, &uhi)]);

    let lx = sup_lipschitz(&cfg.dynamics, &lo, &hi, 0..n);
    let lu = cfg.dynamics.iter().map(|f| f.partial_lipschitz(&lo, &hi, n..n + m).powi(2)).sum::<f64>().sqrt();
    let lu = round_up(lu);
    let big_m = flow_bound(&cfg.dynamics, &lo, &hi);
    let g = FnForm::Sum {
        terms: cfg
            .clf
            .gradient
            .iter()
            .zip(&cfg.dynamics)
            .map(|(a, b)| FnForm::Product { factors: vec![a.clone(), b.clone()] })
            .collect(),
    };
    let lam = g.partial_lipschitz(&lo, &hi, 0..n);

    let dynamics = cfg.dynamics.clone();
    let f = move |x: &[f64], u: &[f64], out: &mut [f64]| {
        with_args(x, u, |arg| {
            for (o, form) in out.iter_mut().zip(&dynamics) {
                *o = form.eval(arg);
            }
        })
    };
    let gradient = cfg.clf.gradient.clone();
    let grad = move |x: &[f64]| gradient.iter().map(|g| g.eval(x)).collect::<Vec<f64>>();
    let p = CLFProblem {
        system: ControlSystem::new(n, m, f, lx, xb)?,
        control_box: ub,
        control_lipschitz: lu,
        v: scalar_fn("v", &cfg.clf.v, &xlo, &xhi)?,
        gradient: Arc::new(grad),
        target_radius: cfg.clf.target_radius,
        overshoot: cfg.clf.overshoot,
        flow_bound: big_m,
        gradient_flow_lipschitz: lam,
        annulus_eps: cfg.clf.annulus_eps,
        budget: DEFAULT_MESH_BUDGET,
    };
    p.validate()?;
    Ok(p)
}

fn constants(p: &CLFProblem) -> serde_json::Value {
    json!({
        "lipschitz_x": p.system.lipschitz_x,
        "control_lipschitz": p.control_lipschitz,
        "flow_bound": p.flow_bound,
        "gradient_flow_lipschitz": p.gradient_flow_lipschitz,
    })
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: ShhConfig = parse(text)?;
    positive("feedback_eps", cfg.clf.feedback_eps)?;
    positive("eta_max", cfg.clf.eta_max)?;
    positive("solver_eps", cfg.solver_eps)?;
    let p = problem(&cfg)?;
    let outcome = find_sampling_time(&p, cfg.clf.eta_max, cfg.clf.feedback_eps)?;
    let cert = match &outcome {
        SamplingOutcome::Certified(c) => c.clone(),
        SamplingOutcome::Failed(fail) => {
            let fields = json!({ "cause": fail.cause, "feedback_eps": cfg.clf.feedback_eps, "constants": constants(&p) });
            return Ok(Outcome::new(Verdict::Failure, fields).payload(json!({ "point": fail.point, "detail": fail.detail })));
        }
    };

    let mut fields = json!({
        "eta": cert.eta,
        "margin": cert.margin,
        "annulus_nodes": cert.annulus_nodes,
        "horizon": cert.horizon,
        "slack": cert.slack,
        "feedback_eps": cert.feedback_eps,
        "constants": constants(&p),
    });
    let mut out = Outcome::new(Verdict::Certified, serde_json::Value::Null);
    if let Some(x0) = &cfg.x0 {
        if x0.len() != cfg.dim {
            return Err(CliError::Config("x0 must match dim".into()));
        }
        let horizon = cfg.horizon.unwrap_or(cert.horizon);
        positive("horizon", horizon)?;
        let fb = p.clone();
        let eps = cfg.clf.feedback_eps;
        let center = p.control_box.center.clone();
        let policy = SampleHoldPolicy::new(
            move |x: &[f64]| clf_feedback(&fb, x, eps).map(|v| v.control).unwrap_or_else(|_| center.clone()),
            cert.eta,
        )?;
        let sol = sample_hold_trajectory(&p.system, &policy, x0, horizon, cfg.solver_eps)?;
        let err = sol.error_bound.hi();
        let norms: Vec<f64> = (0..sol.len()).map(|k| sol.state(k).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let entry = norms.iter().position(|&r| r + err <= p.target_radius + cert.slack);
        fields["closed_loop"] = json!({
            "x0": x0,
            "horizon": horizon,
            "endpoint": sol.endpoint(),
            "error_bound": err,
            "entered_target": entry.is_some(),
            "entry_time": entry.map(|k| sol.grid[k]),
        });
        if entry.is_none() {
            out.verdict = Verdict::Failure;
        }
        out = out.file("shh_trajectory.csv", sol.to_csv(cfg.csv_stride.max(1)));
    }
    out.fields = fields;

    if ctx.precision_audit {
        let fine = find_sampling_time(&p, cfg.clf.eta_max, cfg.clf.feedback_eps / 2.0)?;
        // A smaller optimizer error can only help the certified η.
        let audit = match fine {
            SamplingOutcome::Certified(c) => {
                json!({ "feedback_eps": cfg.clf.feedback_eps / 2.0, "eta": c.eta, "consistent": c.eta >= cert.eta })
            }
            SamplingOutcome::Failed(f) => {
                json!({ "feedback_eps": cfg.clf.feedback_eps / 2.0, "cause": f.cause, "consistent": false })
            }
        };
        out = out.audit(Some(audit));
    }
    Ok(out)
}
