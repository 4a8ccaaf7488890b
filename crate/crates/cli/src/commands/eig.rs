use constructa::eigen::{approx_eigenpairs_with_tau, hurwitz_verdict, ComplexMatrix, Verdict as Hurwitz, DEFAULT_TAU};
use serde::Deserialize;
use serde_json::json;

use super::csv_line;
use crate::config::{parse, positive, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EigConfig {
    /// Path to a matrix file, relative to the config.
    matrix_file: Option<String>,
    /// Real rows given inline.
    rows: Option<Vec<Vec<f64>>>,
    eps: f64,
    tau: Option<f64>,
}

fn load(cfg: &EigConfig, ctx: &RunContext) -> Result<ComplexMatrix, CliError> {
    match (&cfg.matrix_file, &cfg.rows) {
        (Some(path), None) => {
            let full = ctx.config_dir.join(path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", full.display())))?;
            Ok(ComplexMatrix::parse(&text)?)
        }
        (None, Some(rows)) => {
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            Ok(ComplexMatrix::from_rows(&refs)?)
        }
        _ => Err(CliError::Config("give exactly one of matrix_file or rows".into())),
    }
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: EigConfig = parse(text)?;
    positive("eps", cfg.eps)?;
    let tau = cfg.tau.unwrap_or(DEFAULT_TAU);
    positive("tau", tau)?;
    let a = load(&cfg, ctx)?;
    let dec = approx_eigenpairs_with_tau(&a, cfg.eps, tau)?;
    let hv = hurwitz_verdict(&a, cfg.eps)?;

    let mut pairs = String::from("lambda_re,lambda_im,residual,residual_radius,cluster\n");
    for p in &dec.pairs {
        pairs += &csv_line(&[p.lambda.re, p.lambda.im, p.residual.value, p.residual.radius, p.cluster as f64]);
    }
    let mut roots = String::from("re,im,radius\n");
    for (z, r) in dec.roots.roots.iter().zip(&dec.roots.radii) {
        roots += &csv_line(&[z.re, z.im, *r]);
    }
    let verdict = match hv.verdict {
        Hurwitz::Stable => Verdict::Certified,
        Hurwitz::Unstable => Verdict::Counterexample,
        Hurwitz::Undecided => Verdict::Undecided,
    };
    let max_residual = dec.pairs.iter().map(|p| p.residual.hi()).fold(0.0, f64::max);
    let fields = json!({
        "hurwitz": hv.verdict,
        "margin": hv.margin.value,
        "margin_radius": hv.margin.radius,
        "eps": cfg.eps,
        "tau": tau,
        "gram_min": dec.gram_min,
        "pairs": dec.pairs.len(),
        "eigenpairs_success": dec.success,
        "max_residual": max_residual,
        "roots_converged": dec.roots.converged,
        "clusters": dec.roots.clusters.len(),
    });
    let audit = if ctx.precision_audit {
        let fine = approx_eigenpairs_with_tau(&a, cfg.eps / 2.0, tau)?;
        // Every coarse root lies within its radius plus the fine radius of
        // some fine root.
        let worst = dec
            .roots
            .roots
            .iter()
            .zip(&dec.roots.radii)
            .map(|(z, r)| {
                fine.roots
                    .roots
                    .iter()
                    .zip(&fine.roots.radii)
                    .map(|(w, s)| (z - w).norm() - r - s)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        Some(json!({ "eps": cfg.eps / 2.0, "root_excess": worst.max(0.0), "consistent": worst <= 0.0 }))
    } else {
        None
    };
    Ok(Outcome::new(verdict, fields)
        .payload(json!({ "lambdas": dec.pairs.iter().map(|p| [p.lambda.re, p.lambda.im]).collect::<Vec<_>>() }))
        .file("eig_pairs.csv", pairs)
        .file("eig_roots.csv", roots)
        .audit(audit))
}
