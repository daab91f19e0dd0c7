//! A pipeline config small enough to run end to end in seconds.

use std::fs;
use std::path::Path;

use tactile_surface::pipeline::{Pipeline, PipelineConfig};

pub const TINY: &str = r#"{
    "workdir": "work",
    "seed": 5,
    "objects": [
        {"name": "cube", "mesh": {"kind": "cube", "side": 0.04}},
        {"name": "sphere", "mesh": {"kind": "sphere", "radius": 0.02, "subdivisions": 3}}
    ],
    "sampling": {"min_distance": 0.004},
    "simulation": {
        "sizes": {"train_real": 16, "train_sim": 32, "test_real": 16},
        "poses": {"spins": [0.0, 1.5], "depths": [0.001]}
    },
    "diffusion": {
        "training": {"steps": 10, "batch_size": 4},
        "translate": {"t_prime": 5}
    },
    "classifier": {
        "training": {"steps": 15, "batch_size": 8},
        "probe": {"steps": 10, "batch_size": 8, "hidden": 8, "lr": 0.001, "holdout": 0.3}
    }
}"#;

pub fn setup(dir: &Path, overrides: &[&str]) -> Pipeline {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let path = dir.join("config.json");
    fs::write(&path, TINY).unwrap();
    let (config, base) = PipelineConfig::load(&path, &overrides).unwrap();
    Pipeline::new(config, base)
}

pub fn run_all(p: &Pipeline) {
    p.sample().unwrap();
    p.label().unwrap();
    p.simulate().unwrap();
    p.train_diffusion().unwrap();
    p.translate().unwrap();
    p.train_classifier().unwrap();
    p.evaluate().unwrap();
}
