//! Simplified vision-based tactile sensor: height-map ray casting,
//! tri-light Lambertian shading, background subtraction and labeled dataset
//! generation. A perturbed-optics variant of the same sensor plays the
//! target ("real") domain.

mod dataset;
mod image;
mod render;
mod sensor;

pub use dataset::{
    generate_corpus_dataset, generate_dataset, object_histogram, read_dataset, write_dataset, Dataset, DatasetItem,
    DatasetSpec, SimObject, MANIFEST_FILE,
};
pub use image::{HeightMap, TactileImage};
pub use render::{
    add_background, add_noise, background, render_contact, render_heightmap, shade, subtract_background, ContactPose,
    SensorFrame,
};
pub use sensor::{DomainPerturbation, Light, SensorModel};
