use std::collections::HashMap;

use rand::Rng as _;

use super::{Point3, TriangleMesh, Vector3};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// A point on a mesh surface with its (outward, unit) normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub position: Point3,
    pub normal: Vector3,
}

/// Samples whose pairwise distances are all at least `min_distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    samples: Vec<SurfaceSample>,
    min_distance: f64,
}

impl SampleCloud {
    pub fn new(samples: Vec<SurfaceSample>, min_distance: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("sample cloud must be nonempty".into()));
        }
        Ok(Self {
            samples,
            min_distance,
        })
    }

    pub fn samples(&self) -> &[SurfaceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn positions(&self) -> impl Iterator<Item = Point3> + '_ {
        self.samples.iter().map(|s| s.position)
    }
}

/// Cell key of a uniform grid.
pub(crate) fn cell_of(p: &Point3, cell: f64) -> (i64, i64, i64) {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Dart throwing over area-weighted random surface points.
///
/// A candidate is accepted when no accepted sample lies closer than
/// `min_distance`. The candidate budget is 30 times the hexagonal packing
/// estimate `area / (sqrt(3)/2 * min_distance^2)`. Each sample carries the
/// normal of the face it was drawn from.
pub fn poisson_disk_sample(mesh: &TriangleMesh, min_distance: f64, seed: u64) -> Result<SampleCloud> {
    if !min_distance.is_finite() || min_distance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "min_distance must be finite and positive, got {min_distance}"
        )));
    }
    let nfaces = mesh.faces().len();
    let mut cumulative = Vec::with_capacity(nfaces);
    let mut total = 0.0;
    for f in 0..nfaces {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let packing = total / (3f64.sqrt() / 2.0 * min_distance * min_distance);
    let budget = ((30.0 * packing).ceil() as usize).max(30);

    let mut rng = seeded(seed);
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut samples: Vec<SurfaceSample> = Vec::new();
    let d2 = min_distance * min_distance;

    for _ in 0..budget {
        let r: f64 = rng.random_range(0.0..total);
        let face = cumulative.partition_point(|&c| c <= r).min(nfaces - 1);
        let [a, b, c] = mesh.triangle(face);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let su = u.sqrt();
        let p = Point3::from(a.coords * (1.0 - su) + b.coords * (su * (1.0 - v)) + c.coords * (su * v));

        let (cx, cy, cz) = cell_of(&p, min_distance);
        let mut blocked = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(idx) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if idx.iter().any(|&i| (samples[i].position - p).norm_squared() < d2) {
                            blocked = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !blocked {
            grid.entry((cx, cy, cz)).or_default().push(samples.len());
            samples.push(SurfaceSample {
                position: p,
                normal: mesh.normals()[face],
            });
        }
    }
    SampleCloud::new(samples, min_distance)
}
