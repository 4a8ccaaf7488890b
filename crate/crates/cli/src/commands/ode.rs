use constructa::forms::FnForm;
use constructa::trajectories::{picard_solve, RegularRHS, RhsPiece};
use constructa::Modulus;
use serde::Deserialize;
use serde_json::json;

use crate::config::{check_arity, corners, joint, parse, positive, sup_lipschitz, with_args, BoxSpec, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeConfig {
    dim: usize,
    state_box: BoxSpec,
    x0: Vec<f64>,
    horizon: f64,
    eps: f64,
    /// Piece boundaries; defaults to `[0, horizon]`.
    breakpoints: Option<Vec<f64>>,
    pieces: Vec<PieceConfig>,
    #[serde(default = "default_stride")]
    csv_stride: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceConfig {
    /// One form per component over `[x.., t]`.
    rhs: Vec<FnForm>,
}

fn default_stride() -> usize {
    1
}

fn build(cfg: &OdeConfig) -> Result<RegularRHS, CliError> {
    let cube = cfg.state_box.cube()?;
    if cube.dim() != cfg.dim || cfg.x0.len() != cfg.dim {
        return Err(CliError::Config("state_box and x0 must match dim".into()));
    }
    let breakpoints = cfg.breakpoints.clone().unwrap_or(vec![0.0, cfg.horizon]);
    if breakpoints.len() != cfg.pieces.len() + 1 {
        return Err(CliError::Config("need one piece per breakpoint interval".into()));
    }
    let (lo, hi) = corners(&cube);
    let mut pieces = Vec::new();
    for (k, p) in cfg.pieces.iter().enumerate() {
        if p.rhs.len() != cfg.dim {
            return Err(CliError::Config(format!("piece {k} needs {} rhs forms", cfg.dim)));
        }
        for f in &p.rhs {
            check_arity("rhs", f, cfg.dim + 1)?;
        }
        let (t0, t1) = (breakpoints[k], breakpoints[k + 1]);
        let (blo, bhi) = joint(&[(&lo, &hi), (&[t0], &[t1])]);
        let lx = sup_lipschitz(&p.rhs, &blo, &bhi, 0..cfg.dim);
        let lt = sup_lipschitz(&p.rhs, &blo, &bhi, cfg.dim..cfg.dim + 1);
        let forms = p.rhs.clone();
        let f = move |x: &[f64], t: f64, out: &mut [f64]| {
            with_args(x, &[t], |arg| {
                for (o, form) in out.iter_mut().zip(&forms) {
                    *o = form.eval(arg);
                }
            })
        };
        pieces.push(RhsPiece::new(f, lx, Modulus::lipschitz(lt)));
    }
    Ok(RegularRHS::new(cfg.dim, breakpoints, pieces, cube)?)
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: OdeConfig = parse(text)?;
    positive("eps", cfg.eps)?;
    positive("horizon", cfg.horizon)?;
    let rhs = build(&cfg)?;
    let sol = picard_solve(&rhs, &cfg.x0, cfg.horizon, cfg.eps)?;
    let fields = json!({
        "endpoint": sol.endpoint(),
        "error_bound": sol.error_bound.value,
        "error_bound_radius": sol.error_bound.radius,
        "nodes": sol.len(),
        "contraction": sol.contraction,
        "lipschitz": rhs.lipschitz(),
        "eps": cfg.eps,
    });
    let audit = if ctx.precision_audit {
        let fine = picard_solve(&rhs, &cfg.x0, cfg.horizon, cfg.eps / 2.0)?;
        let gap = sol.endpoint().iter().zip(fine.endpoint()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let allowed = sol.error_bound.hi() + fine.error_bound.hi();
        Some(json!({ "eps": cfg.eps / 2.0, "endpoint_gap": gap, "allowed": allowed, "consistent": gap <= allowed }))
    } else {
        None
    };
    Ok(Outcome::new(Verdict::Success, fields)
        .file("ode_trajectory.csv", sol.to_csv(cfg.csv_stride.max(1)))
        .audit(audit))
}
