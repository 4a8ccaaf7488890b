//! Located sets: sets whose distance function can be computed to any
//! precision, realized through an ε ↦ mesh generator.

use std::sync::Arc;

use crate::error::{positive, Error, Result};
use crate::mesh::{build_ball_mesh, build_mesh, FiniteMesh, Hypercube, SetDescriptor};
use crate::real::CertifiedReal;

pub type MeshGenerator = Arc<dyn Fn(f64) -> Result<FiniteMesh> + Send + Sync>;

#[derive(Clone)]
pub struct LocatedSet {
    generator: MeshGenerator,
}

impl std::fmt::Debug for LocatedSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("LocatedSet(<generator>)")
    }
}

impl LocatedSet {
    pub fn new(generator: impl Fn(f64) -> Result<FiniteMesh> + Send + Sync + 'static) -> Self {
        Self { generator: Arc::new(generator) }
    }

    pub fn cube(cube: Hypercube, budget: u128) -> Self {
        Self::new(move |eps| build_mesh(&cube, eps, budget))
    }

    pub fn ball(center: Vec<f64>, radius: f64, budget: u128) -> Self {
        Self::new(move |eps| build_ball_mesh(&center, radius, eps, budget))
    }

    /// The circle of the given radius in the plane.
    pub fn circle(center: [f64; 2], radius: f64, budget: u128) -> Self {
        Self::new(move |eps| {
            positive("mesh precision", eps)?;
            // Nodes at angular spacing 2π/N leave every circle point within
            // 2R·sin(π/(2N)) of a node.
            let count = if eps >= radius {
                1
            } else {
                let half_angle = (eps / (2.0 * radius)).asin();
                (std::f64::consts::PI / (2.0 * half_angle)).ceil() as u128 + 1
            };
            if count > budget {
                return Err(Error::Budget { what: "circle mesh", required: count, budget });
            }
            let pts = (0..count)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                })
                .collect();
            FiniteMesh::from_points(pts, eps, SetDescriptor::Custom(format!("circle r={radius}")))
        })
    }

    pub fn mesh(&self, eps: f64) -> Result<FiniteMesh> {
        positive("mesh precision", eps)?;
        (self.generator)(eps)
    }
}

/// Distance from `x` to the located set, to precision `eps`.
///
/// The mesh minimum overestimates the true infimum by at most `eps`, so the
/// returned radius is `eps`.
pub fn located_distance(set: &LocatedSet, x: &[f64], eps: f64) -> Result<CertifiedReal> {
    let mesh = set.mesh(eps)?;
    if mesh.dim() != x.len() {
        return Err(Error::Argument(format!(
            "point has dimension {}, set has {}",
            x.len(),
            mesh.dim()
        )));
    }
    let value = mesh.nearest_distance(x);
    CertifiedReal::new(value, eps)
}
