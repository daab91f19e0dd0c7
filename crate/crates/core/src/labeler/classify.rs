use rayon::prelude::*;

use super::{kmeans, local_curvature, CurvatureResult, LabelerConfig, SurfaceLabel};
use crate::error::{Error, Result};
use crate::geometry::{NeighborGrid, SampleCloud, Vector3};
use crate::rng::derive_seed;

/// `loss(K=2) - loss(K=3)` of k-means on the normals, clamped at zero.
pub fn delta_loss_23(normals: &[Vector3], config: &LabelerConfig, seed: u64) -> Result<f64> {
    if normals.len() < 3 {
        return Err(Error::InsufficientNeighborhood {
            found: normals.len(),
            required: 3,
        });
    }
    let (restarts, iters) = (config.kmeans_restarts, config.kmeans_max_iters);
    let two = kmeans(normals, 2, restarts, iters, derive_seed(seed, 2))?;
    let three = kmeans(normals, 3, restarts, iters, derive_seed(seed, 3))?;
    Ok((two.loss - three.loss).max(0.0))
}

pub fn classify_point(
    curvature: &CurvatureResult,
    normals: &[Vector3],
    config: &LabelerConfig,
    seed: u64,
) -> Result<SurfaceLabel> {
    let c = curvature.curvature;
    if c < config.t1 {
        Ok(SurfaceLabel::Flat)
    } else if c < config.t2 {
        Ok(SurfaceLabel::Curve)
    } else if delta_loss_23(normals, config, seed)? <= config.delta23_threshold {
        Ok(SurfaceLabel::Edge)
    } else {
        Ok(SurfaceLabel::Corner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: SampleCloud,
    pub labels: Vec<SurfaceLabel>,
    /// `None` where the neighborhood was too thin and the label was inherited.
    pub curvatures: Vec<Option<CurvatureResult>>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Point counts per label, indexed by label code.
    pub fn histogram(&self) -> [usize; 4] {
        let mut h = [0; 4];
        for l in &self.labels {
            h[l.code() as usize] += 1;
        }
        h
    }

    pub fn indices_with(&self, label: SurfaceLabel) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelReport {
    pub radius: f64,
    /// `(point, donor)` pairs for points labeled by their nearest labeled neighbor.
    pub fallbacks: Vec<(usize, usize)>,
}

/// Labels every point from its radius neighborhood. Points whose
/// neighborhood is smaller than `min_neighborhood` take the label of the
/// nearest directly labeled point. Each point's k-means seed is derived
/// from `seed` and its index, so the result does not depend on scheduling.
pub fn label_cloud(cloud: &SampleCloud, config: &LabelerConfig, seed: u64) -> Result<(LabeledCloud, LabelReport)> {
    config.validate()?;
    let radius = config.query_radius(cloud.min_distance());
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!("neighborhood radius must be positive, got {radius}")));
    }
    let grid = NeighborGrid::new(cloud, radius)?;
    let samples = cloud.samples();

    let direct: Vec<Option<(SurfaceLabel, CurvatureResult)>> = (0..samples.len())
        .into_par_iter()
        .map(|i| -> Result<_> {
            let nbrs = grid.query(i)?;
            if nbrs.len() < config.min_neighborhood {
                return Ok(None);
            }
            let positions: Vec<_> = nbrs.iter().map(|&j| samples[j].position).collect();
            let curv = local_curvature(&positions, config.min_neighborhood)?;
            let label = if curv.curvature < config.t2 {
                classify_point(&curv, &[], config, 0)?
            } else {
                let normals: Vec<_> = nbrs.iter().map(|&j| samples[j].normal).collect();
                classify_point(&curv, &normals, config, derive_seed(seed, i as u64))?
            };
            Ok(Some((label, curv)))
        })
        .collect::<Result<_>>()?;

    let labeled: Vec<usize> = (0..direct.len()).filter(|&i| direct[i].is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::InsufficientNeighborhood {
            found: 0,
            required: config.min_neighborhood,
        });
    }

    let mut report = LabelReport {
        radius,
        fallbacks: Vec::new(),
    };
    let mut labels = Vec::with_capacity(direct.len());
    let mut curvatures = Vec::with_capacity(direct.len());
    for (i, d) in direct.iter().enumerate() {
        match d {
            Some((l, c)) => {
                labels.push(*l);
                curvatures.push(Some(*c));
            }
            None => {
                let p = samples[i].position;
                let donor = *labeled
                    .iter()
                    .min_by(|&&a, &&b| {
                        let da = (samples[a].position - p).norm_squared();
                        let db = (samples[b].position - p).norm_squared();
                        da.total_cmp(&db)
                    })
                    .expect("nonempty");
                report.fallbacks.push((i, donor));
                labels.push(direct[donor].expect("labeled donor").0);
                curvatures.push(None);
            }
        }
    }
    if !report.fallbacks.is_empty() {
        log::warn!(
            "{} of {} points had fewer than {} neighbors and inherited a label",
            report.fallbacks.len(),
            samples.len(),
            config.min_neighborhood
        );
    }
    Ok((
        LabeledCloud {
            cloud: cloud.clone(),
            labels,
            curvatures,
        },
        report,
    ))
}
