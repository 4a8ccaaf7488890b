pub mod danskin;
pub mod dd;
pub mod eigen;
pub mod error;
pub mod evt;
pub mod forms;
pub mod func;
pub mod interval;
pub mod located;
pub mod mesh;
pub mod modulus;
pub mod optimize;
pub mod real;
pub mod selector;
pub mod stability;
pub mod trajectories;

pub use error::{Error, Result};
pub use located::{located_distance, LocatedSet};
pub use mesh::{build_ball_mesh, build_mesh, FiniteMesh, Hypercube, SetDescriptor};
pub use modulus::Modulus;
pub use real::CertifiedReal;
