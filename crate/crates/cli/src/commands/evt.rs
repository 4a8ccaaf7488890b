use constructa::evt::{epsilon_minimize_with_budget, write_policy_table, Functional, PolicyClass, DEFAULT_NET_BUDGET};
use constructa::forms::FnForm;
use serde::Deserialize;
use serde_json::json;

use crate::config::{corners, parse, positive, scalar_fn, BoxSpec, CliError};
use crate::record::{Outcome, Verdict};
use crate::RunContext;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvtConfig {
    class: ClassConfig,
    functional: FunctionalConfig,
    eps: f64,
    budget: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassConfig {
    domain: BoxSpec,
    #[serde(default = "one")]
    output_dim: usize,
    lipschitz: f64,
    bound: f64,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FunctionalConfig {
    /// `offset + weight·‖κ(x0) − a‖²`.
    PointQuadratic { x0: Vec<f64>, a: Vec<f64>, offset: f64, weight: f64 },
    /// `offset + weight·mean ‖κ − g‖²` by the midpoint rule.
    MeanSquareDeviation { target: Vec<FnForm>, target_bound: f64, offset: f64, weight: f64, cells: usize },
    /// `offset + weight·sup ‖κ − g‖` over a mesh.
    SupDeviation { target: Vec<FnForm>, offset: f64, weight: f64, resolution: f64 },
}

fn functional(cfg: &FunctionalConfig, class: &ClassConfig) -> Result<Functional, CliError> {
    let domain = class.domain.cube()?;
    let (lo, hi) = corners(&domain);
    let targets = |forms: &[FnForm]| {
        if forms.len() != class.output_dim {
            return Err(CliError::Config(format!("target needs {} components", class.output_dim)));
        }
        forms.iter().map(|f| scalar_fn("target", f, &lo, &hi)).collect::<Result<Vec<_>, _>>()
    };
    Ok(match cfg {
        FunctionalConfig::PointQuadratic { x0, a, offset, weight } => {
            Functional::point_quadratic(x0.clone(), a.clone(), *offset, *weight, class.bound)?
        }
        FunctionalConfig::MeanSquareDeviation { target, target_bound, offset, weight, cells } => {
            Functional::mean_square_deviation(
                domain.clone(),
                targets(target)?,
                *target_bound,
                *offset,
                *weight,
                *cells,
                class.bound,
            )?
        }
        FunctionalConfig::SupDeviation { target, offset, weight, resolution } => {
            Functional::sup_deviation(domain.clone(), targets(target)?, *offset, *weight, *resolution)?
        }
    })
}

pub fn run(text: &str, ctx: &RunContext) -> Result<Outcome, CliError> {
    let cfg: EvtConfig = parse(text)?;
    positive("eps", cfg.eps)?;
    let class = PolicyClass::new(cfg.class.domain.cube()?, cfg.class.output_dim, cfg.class.lipschitz, cfg.class.bound)?;
    let j = functional(&cfg.functional, &cfg.class)?;
    let budget = cfg.budget.map(u128::from).unwrap_or(DEFAULT_NET_BUDGET);
    let r = epsilon_minimize_with_budget(&j, &class, cfg.eps, budget)?;
    let fields = json!({
        "value": r.value.value,
        "value_radius": r.value.radius,
        "eps": cfg.eps,
        "index": r.index,
        "net_size": r.net_size,
        "net_precision": r.net_precision,
        // J[κ^ε] − ε is a lower bound on the infimum.
        "infimum_lower_bound": r.value.lo() - cfg.eps,
    });
    let audit = if ctx.precision_audit {
        let fine = epsilon_minimize_with_budget(&j, &class, cfg.eps / 2.0, budget)?;
        // Both values are within their precision above the infimum.
        let consistent = fine.value.lo() <= r.value.hi() && r.value.lo() - cfg.eps <= fine.value.hi();
        Some(json!({ "eps": cfg.eps / 2.0, "value": fine.value.value, "net_size": fine.net_size, "consistent": consistent }))
    } else {
        None
    };
    Ok(Outcome::new(Verdict::Success, fields)
        .file("evt_policy.txt", write_policy_table(&r.policy))
        .audit(audit))
}
