//! Triangle meshes, uniform surface sampling and neighborhood queries.

pub(crate) mod io;
mod mesh;
mod neighbors;
mod sampling;
pub mod shapes;

pub use io::{load_mesh, read_cloud_ply, write_cloud_ply, write_obj};
pub use mesh::TriangleMesh;
pub use neighbors::{radius_neighbors, NeighborGrid};
pub use sampling::{poisson_disk_sample, SampleCloud, SurfaceSample};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
