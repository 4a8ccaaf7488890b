//! Hypercubes and the finite meshes that realize their total boundedness.
//!
//! Grid meshes are nested across precisions: the per-axis node count is
//! always `2^j + 1`, so the mesh at a finer precision contains every node of
//! a coarser one (bit-for-bit), and argmin/argmax results over meshes are
//! monotone under refinement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};

/// Default cap on the number of mesh nodes.
pub const DEFAULT_MESH_BUDGET: u128 = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypercube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Hypercube {
    /// A closed cube of side `side` centered at `center`. A side of zero is
    /// accepted and denotes the single point `center`.
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Argument("hypercube dimension must be at least 1".into()));
        }
        if !(side >= 0.0 && side.is_finite()) {
            return Err(Error::Argument(format!("hypercube side must be finite and >= 0, got {side}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("hypercube center must be finite".into()));
        }
        Ok(Self { center, side })
    }

    /// The cube `[lo, hi]^n`.
    pub fn from_bounds(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("empty range [{lo}, {hi}]")));
        }
        Self::new(vec![0.5 * (lo + hi); dim], hi - lo)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::from_bounds(lo, hi, 1)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }

    pub fn diameter(&self) -> f64 {
        self.side * (self.dim() as f64).sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| self.lo(i) <= x[i] && x[i] <= self.hi(i))
    }

    /// Radius of the largest origin-centered ball inside the cube (zero if
    /// the origin is outside).
    pub fn inscribed_radius_at_origin(&self) -> f64 {
        (0..self.dim())
            .map(|i| (-self.lo(i)).min(self.hi(i)))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let t: f64 = rng.gen();
                (self.lo(i) + t * self.side).clamp(self.lo(i), self.hi(i))
            })
            .collect()
    }
}

/// What a mesh approximates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetDescriptor {
    Cube(Hypercube),
    Ball { center: Vec<f64>, radius: f64 },
    Custom(String),
}

impl SetDescriptor {
    pub fn contains(&self, x: &[f64]) -> Option<bool> {
        match self {
            SetDescriptor::Cube(c) => Some(c.contains(x)),
            SetDescriptor::Ball { center, radius } => Some(dist(x, center) <= *radius),
            SetDescriptor::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMesh {
    dim: usize,
    coords: Vec<f64>,
    /// Requested precision: every point of the parent is within this
    /// distance of some node.
    pub resolution: f64,
    pub parent: SetDescriptor,
    /// Per-axis node coordinates when the mesh is a tensor grid.
    axes: Option<Vec<Vec<f64>>>,
}

impl FiniteMesh {
    /// A mesh from explicit points; the caller vouches for covering.
    pub fn from_points(points: Vec<Vec<f64>>, resolution: f64, parent: SetDescriptor) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Argument("mesh needs at least one non-empty point".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Argument("mesh points have mixed dimensions".into()));
        }
        let coords = points.into_iter().flatten().collect();
        Ok(Self { dim, coords, resolution, parent, axes: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Grid spacing per axis, for tensor-grid meshes.
    pub fn axes(&self) -> Option<&[Vec<f64>]> {
        self.axes.as_deref()
    }

    /// Distance from `x` to the nearest node.
    pub fn nearest_distance(&self, x: &[f64]) -> f64 {
        self.nearest(x).1
    }

    /// Index of (one of) the nearest nodes and its distance.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        if let Some(axes) = &self.axes {
            // Tensor grid: nearest node is the per-axis nearest.
            let mut index = 0usize;
            let mut d2 = 0.0;
            for (axis, nodes) in axes.iter().enumerate() {
                let (j, d) = nearest_on_axis(nodes, x[axis]);
                index = index * nodes.len() + j;
                d2 += d * d;
            }
            return (index, d2.sqrt());
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points().enumerate() {
            let d = dist(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

fn nearest_on_axis(nodes: &[f64], x: f64) -> (usize, f64) {
    let pos = nodes.partition_point(|&v| v < x);
    let mut best = (0, f64::INFINITY);
    for j in pos.saturating_sub(1)..(pos + 1).min(nodes.len()) {
        let d = (nodes[j] - x).abs();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-axis refinement level `j` (node count `2^j + 1`) for a cube, or
/// `None` when the single center node already covers it.
fn refinement_level(cube: &Hypercube, eps: f64) -> Result<Option<u32>> {
    let n = cube.dim() as f64;
    let scale = (0..cube.dim())
        .map(|i| cube.lo(i).abs().max(cube.hi(i).abs()))
        .fold(cube.side, f64::max);
    // Rounding of node coordinates and of the box bounds themselves.
    let slack = 4.0 * scale * f64::EPSILON;
    let root_n = n.sqrt();
    if eps >= root_n * (0.5 * cube.side + slack) {
        return Ok(None);
    }
    for j in 1..=62u32 {
        let h = cube.side / (1u64 << j) as f64;
        if root_n * (0.5 * h + slack) <= eps {
            return Ok(Some(j));
        }
    }
    Err(Error::Argument(format!(
        "precision {eps} is below the floating-point resolution of the box"
    )))
}

/// Number of nodes [`build_mesh`] would produce, without building it.
pub fn mesh_size(cube: &Hypercube, eps: f64) -> Result<u128> {
    positive("mesh precision", eps)?;
    Ok(match refinement_level(cube, eps)? {
        None => 1,
        Some(j) => ((1u128 << j) + 1).saturating_pow(cube.dim() as u32),
    })
}

/// Uniform ε-net of a hypercube.
///
/// Grid spacing `h` satisfies `√n·h/2 ≤ ε`, so every point of the cube is
/// within `ε` of a node; when `ε` reaches half the diameter the center
/// alone is returned.
pub fn build_mesh(cube: &Hypercube, eps: f64, budget: u128) -> Result<FiniteMesh> {
    let required = mesh_size(cube, eps)?;
    if required > budget {
        return Err(Error::Budget { what: "mesh", required, budget });
    }
    let parent = SetDescriptor::Cube(cube.clone());
    let Some(j) = refinement_level(cube, eps)? else {
        let axes = cube.center.iter().map(|&c| vec![c]).collect();
        return Ok(FiniteMesh {
            dim: cube.dim(),
            coords: cube.center.clone(),
            resolution: eps,
            parent,
            axes: Some(axes),
        });
    };
    let per_axis = (1usize << j) + 1;
    let denom = (1u64 << j) as f64;
    let axes: Vec<Vec<f64>> = (0..cube.dim())
        .map(|axis| {
            let (lo, hi) = (cube.lo(axis), cube.hi(axis));
            (0..per_axis)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == per_axis - 1 {
                        hi
                    } else {
                        (lo + (i as f64 / denom) * cube.side).clamp(lo, hi)
                    }
                })
                .collect()
        })
        .collect();
    let n = cube.dim();
    let total = required as usize;
    let mut coords = Vec::with_capacity(total * n);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        for (axis, &i) in idx.iter().enumerate() {
            coords.push(axes[axis][i]);
        }
        // Odometer increment, last axis fastest.
        for axis in (0..n).rev() {
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(FiniteMesh { dim: n, coords, resolution: eps, parent, axes: Some(axes) })
}

/// ε-net of the closed ball `B_radius(center)`: the circumscribed cube mesh,
/// keeping nodes inside the ball and projecting onto the sphere those within
/// `ε` of it. Projection onto a convex set is non-expansive, so covering is
/// preserved.
pub fn build_ball_mesh(center: &[f64], radius: f64, eps: f64, budget: u128) -> Result<FiniteMesh> {
    if !(radius >= 0.0) {
        return Err(Error::Argument(format!("ball radius must be >= 0, got {radius}")));
    }
    let cube = Hypercube::new(center.to_vec(), 2.0 * radius)?;
    let grid = build_mesh(&cube, eps, budget)?;
    let shrink = 1.0 - 4.0 * f64::EPSILON;
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for p in grid.points() {
        let d = dist(p, center);
        if d <= radius {
            pts.push(p.to_vec());
        } else if d - radius <= eps {
            let k = radius / d * shrink;
            pts.push(p.iter().zip(center).map(|(x, c)| c + (x - c) * k).collect());
        }
    }
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pts.dedup();
    FiniteMesh::from_points(
        pts,
        eps,
        SetDescriptor::Ball { center: center.to_vec(), radius },
    )
}
