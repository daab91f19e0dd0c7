//! Automatic surface-type labeling of sampled point clouds.
//!
//! Per point: gather the radius neighborhood, take the ordered singular
//! values of its covariance, threshold the curvature level
//! `s3 / (s1 + s2 + s3)` into flat / curve / hard-curve, then split
//! hard-curve points into edge or corner by how much a third k-means cluster
//! of the neighborhood normals helps over two.

mod classify;
mod config;
mod curvature;
mod export;
mod kmeans;
mod label;

pub use classify::{classify_point, delta_loss_23, label_cloud, LabelReport, LabeledCloud};
pub use config::{LabelerConfig, RadiusSemantics};
pub use curvature::{local_curvature, symmetric_eigenvalues, CurvatureResult};
pub use export::{read_labeled_ply, write_labeled_csv, write_labeled_ply};
pub use kmeans::{kmeans, KMeansResult};
pub use label::SurfaceLabel;
