use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector3;
use crate::rng::seeded;

/// Directional light pointing from the gel surface toward the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Light {
    pub direction: [f64; 3],
    pub color: [f64; 3],
}

impl Light {
    /// Light at the given azimuth and elevation (radians).
    pub fn from_angles(azimuth: f64, elevation: f64, color: [f64; 3]) -> Self {
        Self {
            direction: [
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            ],
            color,
        }
    }

    pub fn direction(&self) -> Vector3 {
        Vector3::from(self.direction).normalize()
    }
}

/// Geometry and optics of the simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Pixels, `(width, height)`.
    pub resolution: (usize, usize),
    /// Sensing window in meters, `(width, height)`.
    pub patch_size: (f64, f64),
    pub max_penetration: f64,
    pub lights: [Light; 3],
    pub ambient: f64,
    /// Gaussian smoothing of the height map in pixels, standing in for gel
    /// compliance. Zero disables it.
    pub gel_sigma_px: f64,
    /// Output response `v^gamma` after clamping.
    pub gamma: f64,
    /// Additive radial darkening, `-vignette * r^2` with `r` = 1 at the corners.
    pub vignette: f64,
    /// Standard deviation of per-pixel Gaussian noise on contact renders.
    pub noise_sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        let elev = std::f64::consts::FRAC_PI_4;
        let third = 2.0 * std::f64::consts::PI / 3.0;
        Self {
            resolution: (32, 32),
            patch_size: (0.016, 0.016),
            max_penetration: 0.0015,
            lights: [
                Light::from_angles(0.0, elev, [1.0, 0.0, 0.0]),
                Light::from_angles(third, elev, [0.0, 1.0, 0.0]),
                Light::from_angles(2.0 * third, elev, [0.0, 0.0, 1.0]),
            ],
            ambient: 0.1,
            gel_sigma_px: 1.0,
            gamma: 1.0,
            vignette: 0.0,
            noise_sigma: 0.0,
        }
    }
}

impl SensorModel {
    pub fn width(&self) -> usize {
        self.resolution.0
    }

    pub fn height(&self) -> usize {
        self.resolution.1
    }

    /// Pixel pitch in meters, `(x, y)`.
    pub fn pixel_size(&self) -> (f64, f64) {
        (
            self.patch_size.0 / self.resolution.0 as f64,
            self.patch_size.1 / self.resolution.1 as f64,
        )
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.resolution.0 < 8 || self.resolution.1 < 8 {
            v.push(format!("sensor.resolution must be at least 8x8, got {:?}", self.resolution));
        }
        if !(self.patch_size.0 > 0.0 && self.patch_size.1 > 0.0) {
            v.push("sensor.patch_size must be positive".into());
        }
        if !(self.max_penetration > 0.0) {
            v.push("sensor.max_penetration must be positive".into());
        }
        for (i, l) in self.lights.iter().enumerate() {
            let d = Vector3::from(l.direction);
            if !(d.norm() > 0.0 && d.iter().all(|x| x.is_finite())) {
                v.push(format!("sensor.lights[{i}].direction must be a nonzero vector"));
            }
            if !l.color.iter().all(|c| (0.0..=1.0).contains(c)) {
                v.push(format!("sensor.lights[{i}].color must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.ambient) {
            v.push("sensor.ambient must lie in [0, 1]".into());
        }
        if !(self.gel_sigma_px >= 0.0) {
            v.push("sensor.gel_sigma_px must be >= 0".into());
        }
        if !(self.gamma > 0.0) {
            v.push("sensor.gamma must be positive".into());
        }
        if !(self.vignette >= 0.0) {
            v.push("sensor.vignette must be >= 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            v.push("sensor.noise_sigma must be >= 0".into());
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
}

/// Optics changes that turn the simulated sensor into the stand-in for the
/// real one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainPerturbation {
    /// Standard deviation, in degrees, of independent azimuth and elevation
    /// offsets applied to each light.
    pub light_jitter_deg: f64,
    pub gamma: f64,
    pub vignette: f64,
    pub noise_sigma: f64,
}

impl Default for DomainPerturbation {
    fn default() -> Self {
        Self {
            light_jitter_deg: 25.0,
            gamma: 1.4,
            vignette: 0.15,
            noise_sigma: 0.02,
        }
    }
}

impl DomainPerturbation {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.light_jitter_deg >= 0.0) {
            v.push("perturbation.light_jitter_deg must be >= 0".into());
        }
        if !(self.gamma > 0.0) {
            v.push("perturbation.gamma must be positive".into());
        }
        if !(self.vignette >= 0.0) {
            v.push("perturbation.vignette must be >= 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            v.push("perturbation.noise_sigma must be >= 0".into());
        }
        v
    }

    /// The perturbed sensor. Light jitter is drawn once from `seed`, so a
    /// whole target-domain dataset shares one set of optics.
    pub fn apply(&self, sensor: &SensorModel, seed: u64) -> Result<SensorModel> {
        let jitter = Normal::new(0.0, self.light_jitter_deg.to_radians())
            .map_err(|e| Error::InvalidArgument(format!("light jitter: {e}")))?;
        let mut rng = seeded(seed);
        let mut out = sensor.clone();
        for light in &mut out.lights {
            let d = light.direction();
            let azimuth = d.y.atan2(d.x) + jitter.sample(&mut rng);
            let elevation = (d.z.asin() + jitter.sample(&mut rng)).clamp(0.1, 1.45);
            *light = Light::from_angles(azimuth, elevation, light.color);
        }
        out.gamma = self.gamma;
        out.vignette = self.vignette;
        out.noise_sigma = self.noise_sigma;
        Ok(out)
    }
}
