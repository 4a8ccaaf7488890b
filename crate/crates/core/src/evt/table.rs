//! Plain-text policy tables.
//!
//! ```text
//! policy n=1 m=1
//! lipschitz 1
//! bound 1
//! grid 0.25
//! resolution 0.3333333333333333
//! domain 0.5 | 1
//! node 0 | -0.25
//! node 0.5 | 0
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so a table read
//! back reproduces the policy bit for bit.

use std::fmt::Write;
use std::sync::Arc;

use super::PiecewisePolicy;
use crate::error::{Error, Result};
use crate::mesh::{FiniteMesh, Hypercube, SetDescriptor};

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_policy_table(p: &PiecewisePolicy) -> String {
    let mut s = String::new();
    let n = p.nodes.dim();
    writeln!(s, "policy n={} m={}", n, p.output_dim).unwrap();
    writeln!(s, "lipschitz {:?}", p.lipschitz).unwrap();
    writeln!(s, "bound {:?}", p.bound).unwrap();
    writeln!(s, "grid {:?}", p.grid).unwrap();
    writeln!(s, "resolution {:?}", p.nodes.resolution).unwrap();
    if let SetDescriptor::Cube(c) = &p.nodes.parent {
        writeln!(s, "domain {} | {:?}", join(&c.center), c.side).unwrap();
    }
    for (i, x) in p.nodes.points().enumerate() {
        writeln!(s, "node {} | {}", join(x), join(p.node_value(i))).unwrap();
    }
    s
}

fn bad(line: usize, what: &str) -> Error {
    Error::Argument(format!("policy table line {line}: {what}"))
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(line, &format!("bad number {t:?}"))))
        .collect()
}

fn scalar(line: usize, text: &str) -> Result<f64> {
    match numbers(line, text)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(bad(line, "expected one number")),
    }
}

pub fn parse_policy_table(text: &str) -> Result<PiecewisePolicy> {
    let mut dims = None;
    let (mut lipschitz, mut bound, mut grid, mut resolution) = (None, None, 0.0, 0.0);
    let mut parent = SetDescriptor::Custom("policy table".into());
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let (key, rest) = raw.split_once(' ').unwrap_or((raw, ""));
        match key {
            "policy" => {
                let mut n = None;
                let mut m = None;
                for part in rest.split_whitespace() {
                    match part.split_once('=') {
                        Some(("n", v)) => n = v.parse::<usize>().ok(),
                        Some(("m", v)) => m = v.parse::<usize>().ok(),
                        _ => return Err(bad(line, "expected n=<dim> m=<dim>")),
                    }
                }
                dims = Some((n.ok_or_else(|| bad(line, "missing n"))?, m.ok_or_else(|| bad(line, "missing m"))?));
            }
            "lipschitz" => lipschitz = Some(scalar(line, rest)?),
            "bound" => bound = Some(scalar(line, rest)?),
            "grid" => grid = scalar(line, rest)?,
            "resolution" => resolution = scalar(line, rest)?,
            "domain" | "node" => {
                let (n, m) = dims.ok_or_else(|| bad(line, "header must come first"))?;
                let (a, b) = rest.split_once('|').ok_or_else(|| bad(line, "missing '|'"))?;
                let (a, b) = (numbers(line, a)?, numbers(line, b)?);
                if key == "domain" {
                    if a.len() != n || b.len() != 1 {
                        return Err(bad(line, "domain needs n center coordinates and one side"));
                    }
                    parent = SetDescriptor::Cube(Hypercube::new(a, b[0])?);
                } else {
                    if a.len() != n || b.len() != m {
                        return Err(bad(line, "node arity does not match header"));
                    }
                    points.push(a);
                    values.extend(b);
                }
            }
            other => return Err(bad(line, &format!("unknown key {other:?}"))),
        }
    }
    let (_, m) = dims.ok_or_else(|| Error::Argument("policy table has no header".into()))?;
    let lipschitz = lipschitz.ok_or_else(|| Error::Argument("policy table lacks lipschitz".into()))?;
    let bound = bound.ok_or_else(|| Error::Argument("policy table lacks bound".into()))?;
    let mesh = FiniteMesh::from_points(points, resolution, parent)?;
    let mut p = PiecewisePolicy::new(Arc::new(mesh), values, m, lipschitz, bound)?;
    p.grid = grid;
    Ok(p)
}
