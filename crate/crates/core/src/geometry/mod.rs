//! Triangle meshes, the BVH used for every ray query, and the exact distance oracle.

pub mod bvh;
pub mod distance;
pub mod mesh;
pub mod shapes;

pub use bvh::{brute_force_ray_query, Bvh, Facing, RayHit};
pub use distance::exact_distance;
pub use mesh::{load_mesh, write_obj, LoadReport, TriangleMesh};
