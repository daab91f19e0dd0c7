use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{background, render_contact, ContactPose, SensorModel, TactileImage};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceSample, TriangleMesh, Vector3};
use crate::labeler::{LabeledCloud, SurfaceLabel};
use crate::rng::{derive_seed, seeded};

/// One object of a simulation corpus.
#[derive(Debug, Clone, Copy)]
pub struct SimObject<'a> {
    pub name: &'a str,
    pub mesh: &'a TriangleMesh,
    pub labeled: &'a LabeledCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    /// Sensor rotations about the normal, radians.
    pub spins: Vec<f64>,
    /// Penetration depths, meters.
    pub depths: Vec<f64>,
    /// Exact number of images per class, drawn without replacement when
    /// enough poses exist and topped up with repeats otherwise. `None` keeps
    /// every pose.
    pub per_class_quota: Option<usize>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let spins = (0..8).map(|k| k as f64 * std::f64::consts::PI / 4.0).collect();
        Self {
            spins,
            depths: vec![0.0005, 0.001, 0.0015],
            per_class_quota: None,
        }
    }
}

impl DatasetSpec {
    pub fn violations(&self, sensor: &SensorModel) -> Vec<String> {
        let mut v = Vec::new();
        if self.spins.is_empty() || !self.spins.iter().all(|s| s.is_finite()) {
            v.push("dataset.spins must be a nonempty list of finite angles".into());
        }
        if self.depths.is_empty() {
            v.push("dataset.depths must be nonempty".into());
        }
        if !self.depths.iter().all(|&d| d > 0.0 && d <= sensor.max_penetration) {
            v.push(format!(
                "dataset.depths must lie in (0, {}]",
                sensor.max_penetration
            ));
        }
        if self.per_class_quota == Some(0) {
            v.push("dataset.per_class_quota must be positive".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub image: TactileImage,
    pub label: SurfaceLabel,
    pub object: String,
    pub point: usize,
    pub pose: ContactPose,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn images(&self) -> Vec<&TactileImage> {
        self.items.iter().map(|i| &i.image).collect()
    }

    pub fn labels(&self) -> Vec<SurfaceLabel> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for i in &self.items {
            c[i.label.code() as usize] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy)]
struct PoseRef {
    object: usize,
    point: usize,
    spin: usize,
    depth: usize,
}

fn select_poses(objects: &[SimObject], spec: &DatasetSpec, seed: u64) -> Result<Vec<PoseRef>> {
    let mut by_class: [Vec<PoseRef>; 4] = Default::default();
    for (o, obj) in objects.iter().enumerate() {
        for (point, label) in obj.labeled.labels.iter().enumerate() {
            for spin in 0..spec.spins.len() {
                for depth in 0..spec.depths.len() {
                    by_class[label.code() as usize].push(PoseRef {
                        object: o,
                        point,
                        spin,
                        depth,
                    });
                }
            }
        }
    }
    let Some(quota) = spec.per_class_quota else {
        return Ok(by_class.into_iter().flatten().collect());
    };
    let missing: Vec<String> = SurfaceLabel::ALL
        .iter()
        .filter(|l| by_class[l.code() as usize].is_empty())
        .map(|l| l.name().to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    let mut selected = Vec::with_capacity(4 * quota);
    for (c, mut poses) in by_class.into_iter().enumerate() {
        let mut rng = seeded(derive_seed(seed, c as u64));
        poses.shuffle(&mut rng);
        let n = poses.len();
        selected.extend(poses.iter().take(quota).copied());
        for _ in n..quota {
            selected.push(poses[rng.random_range(0..n)]);
        }
    }
    Ok(selected)
}

/// Renders background-subtracted contact images over a corpus. Poses are
/// selected (and class-balanced when a quota is set) before any rendering;
/// each image's noise comes from a seed derived from its position in the
/// output, so results do not depend on thread scheduling.
pub fn generate_corpus_dataset(
    objects: &[SimObject],
    sensor: &SensorModel,
    spec: &DatasetSpec,
    seed: u64,
) -> Result<Dataset> {
    sensor.validate()?;
    let v = spec.violations(sensor);
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    if objects.iter().all(|o| o.labeled.is_empty()) {
        return Err(Error::InvalidArgument("no labeled points to simulate".into()));
    }
    let poses = select_poses(objects, spec, seed)?;
    let bg = background(sensor)?;
    let noise_base = derive_seed(seed, u64::MAX);
    let items = poses
        .par_iter()
        .enumerate()
        .map(|(idx, r)| {
            let obj = &objects[r.object];
            let pose = ContactPose {
                sample: obj.labeled.cloud.samples()[r.point],
                spin: spec.spins[r.spin],
                depth: spec.depths[r.depth],
            };
            let image = render_contact(obj.mesh, &pose, sensor, &bg, derive_seed(noise_base, idx as u64))?;
            Ok(DatasetItem {
                image,
                label: obj.labeled.labels[r.point],
                object: obj.name.to_owned(),
                point: r.point,
                pose,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { items })
}

/// Single-object form of [`generate_corpus_dataset`].
pub fn generate_dataset(
    mesh: &TriangleMesh,
    labeled: &LabeledCloud,
    sensor: &SensorModel,
    spec: &DatasetSpec,
    seed: u64,
) -> Result<Dataset> {
    let obj = SimObject {
        name: "object",
        mesh,
        labeled,
    };
    generate_corpus_dataset(&[obj], sensor, spec, seed)
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    filename: String,
    label: u8,
    object: String,
    point: usize,
    spin: f64,
    depth: f64,
    x: f64,
    y: f64,
    z: f64,
    nx: f64,
    ny: f64,
    nz: f64,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes `images/NNNNNN.ppm` plus `manifest.csv` under `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| Error::parse(&manifest, e.to_string()))?;
    for (i, item) in dataset.items.iter().enumerate() {
        let filename = format!("images/{i:06}.ppm");
        item.image.write_ppm(&dir.join(&filename))?;
        let (p, n) = (item.pose.sample.position, item.pose.sample.normal);
        w.serialize(ManifestRow {
            filename,
            label: item.label.code(),
            object: item.object.clone(),
            point: item.point,
            spin: item.pose.spin,
            depth: item.pose.depth,
            x: p.x,
            y: p.y,
            z: p.z,
            nx: n.x,
            ny: n.y,
            nz: n.z,
        })
        .map_err(|e| Error::parse(&manifest, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.exists() {
        return Err(Error::io(
            &manifest,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset manifest not found"),
        ));
    }
    let mut r = csv::Reader::from_path(&manifest).map_err(|e| Error::parse(&manifest, e.to_string()))?;
    let rows: Vec<ManifestRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(&manifest, e.to_string()))?;
    let items = rows
        .into_par_iter()
        .map(|row| {
            let label = SurfaceLabel::from_code(row.label)
                .ok_or_else(|| Error::parse(&manifest, format!("invalid label code {}", row.label)))?;
            Ok(DatasetItem {
                image: TactileImage::read_ppm(&dir.join(&row.filename))?,
                label,
                object: row.object,
                point: row.point,
                pose: ContactPose {
                    sample: SurfaceSample {
                        position: Point3::new(row.x, row.y, row.z),
                        normal: Vector3::new(row.nx, row.ny, row.nz),
                    },
                    spin: row.spin,
                    depth: row.depth,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { items })
}

/// Per-object class histogram, for logging.
pub fn object_histogram(dataset: &Dataset) -> BTreeMap<String, [usize; 4]> {
    let mut h: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for item in &dataset.items {
        h.entry(item.object.clone()).or_default()[item.label.code() as usize] += 1;
    }
    h
}
