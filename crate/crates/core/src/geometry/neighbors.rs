use std::collections::HashMap;

use super::sampling::cell_of;
use super::{Point3, SampleCloud};
use crate::error::{Error, Result};

/// Indices `i` with `|p_i - p_center| <= radius` (center included), ascending.
/// Brute-force scan; use [`NeighborGrid`] for repeated queries.
pub fn radius_neighbors(cloud: &SampleCloud, center: usize, radius: f64) -> Result<Vec<usize>> {
    if center >= cloud.len() {
        return Err(Error::IndexOutOfRange {
            index: center,
            len: cloud.len(),
        });
    }
    check_radius(radius)?;
    let c = cloud.samples()[center].position;
    let r2 = radius * radius;
    Ok(cloud
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| (s.position - c).norm_squared() <= r2)
        .map(|(i, _)| i)
        .collect())
}

fn check_radius(radius: f64) -> Result<()> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Uniform hash grid with cell size equal to the query radius.
#[derive(Debug, Clone)]
pub struct NeighborGrid<'a> {
    cloud: &'a SampleCloud,
    radius: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> NeighborGrid<'a> {
    pub fn new(cloud: &'a SampleCloud, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in cloud.positions().enumerate() {
            cells.entry(cell_of(&p, radius)).or_default().push(i);
        }
        Ok(Self { cloud, radius, cells })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same contract as [`radius_neighbors`].
    pub fn query(&self, center: usize) -> Result<Vec<usize>> {
        if center >= self.cloud.len() {
            return Err(Error::IndexOutOfRange {
                index: center,
                len: self.cloud.len(),
            });
        }
        Ok(self.query_point(&self.cloud.samples()[center].position))
    }

    pub fn query_point(&self, c: &Point3) -> Vec<usize> {
        let (cx, cy, cz) = cell_of(c, self.radius);
        let r2 = self.radius * self.radius;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(idx) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(
                            idx.iter()
                                .copied()
                                .filter(|&i| (self.cloud.samples()[i].position - c).norm_squared() <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
