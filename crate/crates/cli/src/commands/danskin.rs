use constructa::danskin::{finite_difference_audit, ParametricObjective, ThetaDomain};
use constructa::forms::FnForm;
use serde::Deserialize;
use serde_json::json;

use crate::config::{check_arity, parse, positive, BoxSpec, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DanskinConfig {
    /// `φ` over arguments `[x.., θ..]`.
    objective: FnForm,
    x_box: BoxSpec,
    theta: BoxSpec,
    /// Lipschitz constant of `∇ₓφ` in the joint argument.
    grad_lipschitz: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    delta: f64,
    #[serde(default = "default_steps")]
    steps: Vec<f64>,
}

fn default_steps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: DanskinConfig = parse(text)?;
    positive("delta", cfg.delta)?;
    let x_box = cfg.x_box.cube()?;
    let theta = ThetaDomain::new(cfg.theta.cube()?);
    if cfg.x.len() != x_box.dim() || cfg.v.len() != x_box.dim() {
        return Err(CliError::Config("x and v must match the dimension of x_box".into()));
    }
    if !x_box.contains(&cfg.x) {
        return Err(CliError::Config("x lies outside x_box".into()));
    }
    check_arity("objective", &cfg.objective, x_box.dim() + theta.cube.dim())?;
    let obj = ParametricObjective::from_form(cfg.objective.clone(), &x_box, &theta, cfg.grad_lipschitz)?;
    let report = finite_difference_audit(&obj, &theta, &cfg.x, &cfg.v, cfg.delta, &cfg.steps)?;
    let d = &report.derivative;
    let sandwiched = report.rows.iter().all(|r| r.sandwiched());
    let verdict = if sandwiched { Verdict::Success } else { Verdict::Failure };
    let fields = json!({
        "derivative": d.value.value,
        "derivative_radius": d.value.radius,
        "spread": d.spread,
        "spread_slack": d.spread_slack,
        "optimizer_count": d.set.points.len(),
        "mesh_size": d.set.mesh_size,
        "psi": d.set.psi_hat.value,
        "psi_radius": d.set.psi_hat.radius,
        "delta": cfg.delta,
        "rows_sandwiched": report.rows.iter().filter(|r| r.sandwiched()).count(),
        "rows": report.rows.len(),
    });
    let audit = if ctx.precision_audit {
        let fine = finite_difference_audit(&obj, &theta, &cfg.x, &cfg.v, cfg.delta / 2.0, &cfg.steps)?;
        let a = &d.value;
        let b = &fine.derivative.value;
        // Both enclose a max over nested optimizer sets, so they differ by at
        // most the coarse spread plus both radii.
        let gap = (a.value - b.value).abs();
        let allowed = d.spread_slack + a.radius + b.radius;
        Some(json!({ "delta": cfg.delta / 2.0, "derivative": b.value, "gap": gap, "allowed": allowed, "consistent": gap <= allowed }))
    } else {
        None
    };
    Ok(Outcome::new(verdict, fields)
        .payload(json!({ "witness": d.witness, "optimizers": d.set.points }))
        .file("danskin_audit.csv", report.to_csv())
        .audit(audit))
}
