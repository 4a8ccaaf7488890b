//! Shared config pieces and error mapping.

use std::fmt;

use constructa::forms::{FnForm, REGISTRY};
use constructa::func::ScalarFn;
use constructa::interval::Interval;
use constructa::{Error, Hypercube};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub const EXIT_CONFIG: i32 = 64;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Parses `text` without its top-level `seed`, naming the form registry
/// when a `kind` is not recognized.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    table.remove("seed");
    T::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") {
            CliError::Config(format!("{msg}\nknown function forms: {}", REGISTRY.join(", ")))
        } else {
            CliError::Config(msg)
        }
    })
}

/// The optional top-level `seed`, read before the full parse.
pub fn peek_seed(text: &str) -> Result<Option<u64>, CliError> {
    let v: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    match v.get("seed") {
        None => Ok(None),
        Some(toml::Value::Integer(s)) if *s >= 0 => Ok(Some(*s as u64)),
        Some(_) => Err(CliError::Config("seed must be a non-negative integer".into())),
    }
}

/// A cube, given either by center and side or by scalar bounds repeated
/// over `dim` axes.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BoxSpec {
    Cube { center: Vec<f64>, side: f64 },
    Bounds { lo: f64, hi: f64, dim: Option<usize> },
}

impl BoxSpec {
    pub fn cube(&self) -> Result<Hypercube, CliError> {
        Ok(match self {
            BoxSpec::Cube { center, side } => Hypercube::new(center.clone(), *side)?,
            BoxSpec::Bounds { lo, hi, dim } => Hypercube::from_bounds(*lo, *hi, dim.unwrap_or(1))?,
        })
    }
}

pub fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn corners(cube: &Hypercube) -> (Vec<f64>, Vec<f64>) {
    ((0..cube.dim()).map(|i| cube.lo(i)).collect(), (0..cube.dim()).map(|i| cube.hi(i)).collect())
}

/// Concatenated corners of several boxes, as the flat argument layout of
/// the forms expects.
pub fn joint(parts: &[(&[f64], &[f64])]) -> (Vec<f64>, Vec<f64>) {
    let lo = parts.iter().flat_map(|p| p.0.iter().copied()).collect();
    let hi = parts.iter().flat_map(|p| p.1.iter().copied()).collect();
    (lo, hi)
}

pub fn check_arity(name: &str, form: &FnForm, available: usize) -> Result<(), CliError> {
    let needed = form.validate()?;
    if needed > available {
        return Err(CliError::Config(format!(
            "{name} reads {needed} arguments but only {available} are available"
        )));
    }
    Ok(())
}

pub fn scalar_fn(name: &str, form: &FnForm, lo: &[f64], hi: &[f64]) -> Result<ScalarFn, CliError> {
    check_arity(name, form, lo.len())?;
    Ok(form.to_scalar_fn(lo, hi)?)
}

/// Sup-norm Lipschitz bound of the vector field `forms` in the argument
/// range `vars`: the largest row sum of gradient magnitudes.
pub fn sup_lipschitz(forms: &[FnForm], lo: &[f64], hi: &[f64], vars: std::ops::Range<usize>) -> f64 {
    let bx: Vec<Interval> = lo.iter().zip(hi).map(|(&a, &b)| Interval::new(a, b)).collect();
    let s = forms
        .iter()
        .map(|f| {
            let g = f.grad_range(&bx, vars.end);
            g[vars.clone()].iter().map(|i| i.mag()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    round_up(s)
}

/// Euclidean norm bound of the vector field over the box.
pub fn flow_bound(forms: &[FnForm], lo: &[f64], hi: &[f64]) -> f64 {
    let bx: Vec<Interval> = lo.iter().zip(hi).map(|(&a, &b)| Interval::new(a, b)).collect();
    round_up(forms.iter().map(|f| f.range(&bx).mag().powi(2)).sum::<f64>().sqrt())
}

/// One ulp up, keeping an exact zero.
pub fn round_up(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.next_up()
    }
}

/// Calls `f` with `[x.., extra..]`, on the stack for small arguments.
pub fn with_args<R>(x: &[f64], extra: &[f64], f: impl FnOnce(&[f64]) -> R) -> R {
    let n = x.len() + extra.len();
    if n <= 16 {
        let mut buf = [0.0; 16];
        buf[..x.len()].copy_from_slice(x);
        buf[x.len()..n].copy_from_slice(extra);
        f(&buf[..n])
    } else {
        let mut v = x.to_vec();
        v.extend_from_slice(extra);
        f(&v)
    }
}
