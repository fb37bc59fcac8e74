//! Region-aware approximate convex decomposition.

pub mod acd;
pub mod bench;
pub mod boolean;
pub mod convex;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod kdtree;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
#[cfg(feature = "service")]
pub mod service;
pub mod triangulate;

pub use error::{Error, Result};
pub use geom::{Aabb, Plane, Point, Vector};
pub use mesh::{SurfaceSampleCloud, TriangleMesh, ValidationReport};
pub use convex::{convex_hull, ConvexPart};
