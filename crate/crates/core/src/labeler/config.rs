use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the neighborhood radius is compared against point distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusSemantics {
    /// `|p - q| <= R`
    #[default]
    Distance,
    /// `|p - q|^2 <= R`
    SquaredDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerConfig {
    /// Neighborhood radius; `None` means four times the cloud's min distance.
    pub radius: Option<f64>,
    pub radius_semantics: RadiusSemantics,
    pub t1: f64,
    pub t2: f64,
    pub delta23_threshold: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub min_neighborhood: usize,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            radius: None,
            radius_semantics: RadiusSemantics::Distance,
            t1: 2e-4,
            t2: 0.03,
            delta23_threshold: 0.05,
            kmeans_restarts: 3,
            kmeans_max_iters: 50,
            min_neighborhood: 6,
        }
    }
}

impl LabelerConfig {
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius: Some(radius),
            ..Self::default()
        }
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(r) = self.radius {
            if !(r.is_finite() && r > 0.0) {
                v.push(format!("labeler.radius must be positive, got {r}"));
            }
        }
        if !(self.t1 > 0.0 && self.t1 < self.t2 && self.t2 < 1.0 / 3.0) {
            v.push(format!(
                "labeler thresholds must satisfy 0 < t1 < t2 < 1/3, got t1 = {}, t2 = {}",
                self.t1, self.t2
            ));
        }
        if !(self.delta23_threshold >= 0.0) {
            v.push("labeler.delta23_threshold must be >= 0".into());
        }
        if self.kmeans_restarts < 1 {
            v.push("labeler.kmeans_restarts must be >= 1".into());
        }
        if self.kmeans_max_iters < 1 {
            v.push("labeler.kmeans_max_iters must be >= 1".into());
        }
        if self.min_neighborhood < 4 {
            v.push("labeler.min_neighborhood must be >= 4".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Euclidean query radius for a cloud with the given min distance.
    pub fn query_radius(&self, min_distance: f64) -> f64 {
        let r = self.radius.unwrap_or(4.0 * min_distance);
        match self.radius_semantics {
            RadiusSemantics::Distance => r,
            RadiusSemantics::SquaredDistance => r.sqrt(),
        }
    }
}
