use rand_distr::{Distribution, Normal};

use super::{HeightMap, SensorModel, TactileImage};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceSample, TriangleMesh, Vector3};
use crate::rng::seeded;

/// Sensor placement: pressed along `-sample.normal` at `sample.position`,
/// rotated by `spin` about the normal, `depth` meters into the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPose {
    pub sample: SurfaceSample,
    pub spin: f64,
    pub depth: f64,
}

/// Orthonormal sensor frame: `x`, `y` span the image plane, `z = -normal`
/// points into the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub origin: Point3,
    pub x: Vector3,
    pub y: Vector3,
    pub z: Vector3,
}

impl SensorFrame {
    pub fn new(pose: &ContactPose) -> Result<Self> {
        let n = pose.sample.normal;
        let len = n.norm();
        if !(len.is_finite() && len > 1e-9) {
            return Err(Error::InvalidArgument(format!("degenerate contact normal {n:?}")));
        }
        let n = n / len;
        let z = -n;
        // tangent from the coordinate axis least aligned with the normal
        let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
        let mut axis = axes[0];
        for a in &axes[1..] {
            if a.dot(&n).abs() < axis.dot(&n).abs() {
                axis = *a;
            }
        }
        let t0 = (axis - n * axis.dot(&n)).normalize();
        let x = t0 * pose.spin.cos() + z.cross(&t0) * pose.spin.sin();
        let y = z.cross(&x);
        Ok(Self {
            origin: pose.sample.position,
            x,
            y,
            z,
        })
    }

    /// `(u, v, s)`: image-plane coordinates and offset into the object.
    pub fn to_local(&self, p: &Point3) -> [f64; 3] {
        let d = p - self.origin;
        [d.dot(&self.x), d.dot(&self.y), d.dot(&self.z)]
    }
}

/// Per-pixel offset of the first surface hit behind the contact plane,
/// `+inf` where the ray misses. Only surface closer than `cutoff` is kept.
fn surface_offsets(mesh: &TriangleMesh, frame: &SensorFrame, sensor: &SensorModel, cutoff: f64) -> Vec<f64> {
    let (w, h) = sensor.resolution;
    let (pw, ph) = sensor.pixel_size();
    let (half_w, half_h) = (sensor.patch_size.0 / 2.0, sensor.patch_size.1 / 2.0);
    let local: Vec<[f64; 3]> = mesh.vertices().iter().map(|p| frame.to_local(p)).collect();
    let mut zbuf = vec![f64::INFINITY; w * h];
    for &[a, b, c] in mesh.faces() {
        let (pa, pb, pc) = (local[a], local[b], local[c]);
        if pa[2].min(pb[2]).min(pc[2]) >= cutoff {
            continue;
        }
        let umin = pa[0].min(pb[0]).min(pc[0]);
        let umax = pa[0].max(pb[0]).max(pc[0]);
        let vmin = pa[1].min(pb[1]).min(pc[1]);
        let vmax = pa[1].max(pb[1]).max(pc[1]);
        if umax < -half_w || umin > half_w || vmax < -half_h || vmin > half_h {
            continue;
        }
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        if det.abs() < 1e-18 {
            continue;
        }
        let j0 = ((umin + half_w) / pw - 0.5).ceil().max(0.0) as usize;
        let j1 = ((umax + half_w) / pw - 0.5).floor().min(w as f64 - 1.0);
        let i0 = ((vmin + half_h) / ph - 0.5).ceil().max(0.0) as usize;
        let i1 = ((vmax + half_h) / ph - 0.5).floor().min(h as f64 - 1.0);
        if j1 < 0.0 || i1 < 0.0 {
            continue;
        }
        let tol = -1e-12;
        for i in i0..=i1 as usize {
            let v = (i as f64 + 0.5) * ph - half_h;
            for j in j0..=j1 as usize {
                let u = (j as f64 + 0.5) * pw - half_w;
                let l1 = ((u - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (v - pa[1])) / det;
                let l2 = ((pb[0] - pa[0]) * (v - pa[1]) - (u - pa[0]) * (pb[1] - pa[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 < tol || l1 < tol || l2 < tol {
                    continue;
                }
                let s = l0 * pa[2] + l1 * pb[2] + l2 * pc[2];
                let cell = &mut zbuf[i * w + j];
                if s < *cell {
                    *cell = s;
                }
            }
        }
    }
    zbuf
}

/// Orthographic ray cast of the mesh into the sensor window. A pixel's
/// height is `depth - s`, clamped to `[0, max_penetration]`, where `s` is
/// how far behind the contact plane the surface lies along the ray.
pub fn render_heightmap(mesh: &TriangleMesh, pose: &ContactPose, sensor: &SensorModel) -> Result<HeightMap> {
    if !(pose.depth > 0.0) {
        return Err(Error::InvalidArgument(format!("contact depth must be positive, got {}", pose.depth)));
    }
    let frame = SensorFrame::new(pose)?;
    let offsets = surface_offsets(mesh, &frame, sensor, pose.depth);
    let data = offsets
        .iter()
        .map(|&s| {
            if s.is_finite() {
                (pose.depth - s).clamp(0.0, sensor.max_penetration)
            } else {
                0.0
            }
        })
        .collect();
    Ok(HeightMap {
        width: sensor.width(),
        height: sensor.height(),
        data,
    })
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders.
fn blur(data: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clampi = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * data[y * w + clampi(x as isize + t as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * tmp[clampi(y as isize + t as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Noise-free render: gel smoothing, central-difference normals, Lambertian
/// tri-light shading plus ambient, then vignette and gamma. Values in `[0, 1]`.
pub fn shade(hm: &HeightMap, sensor: &SensorModel) -> Result<TactileImage> {
    let (w, h) = sensor.resolution;
    if hm.width != w || hm.height != h {
        return Err(Error::Shape(format!(
            "height map {}x{} does not match sensor {w}x{h}",
            hm.width, hm.height
        )));
    }
    let z = blur(&hm.data, w, h, sensor.gel_sigma_px);
    let (pw, ph) = sensor.pixel_size();
    let at = |x: isize, y: isize| z[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let lights: Vec<(Vector3, [f64; 3])> = sensor.lights.iter().map(|l| (l.direction(), l.color)).collect();
    let n = w * h;
    let mut data = vec![0.0; 3 * n];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = (at(xi + 1, yi) - at(xi - 1, yi)) / (2.0 * pw);
            let gy = (at(xi, yi + 1) - at(xi, yi - 1)) / (2.0 * ph);
            let normal = Vector3::new(-gx, -gy, 1.0).normalize();
            let cx = (x as f64 + 0.5) / w as f64 * 2.0 - 1.0;
            let cy = (y as f64 + 0.5) / h as f64 * 2.0 - 1.0;
            let r2 = (cx * cx + cy * cy) / 2.0;
            for c in 0..3 {
                let mut v = sensor.ambient;
                for (dir, color) in &lights {
                    v += color[c] * normal.dot(dir).max(0.0);
                }
                let v = (v.clamp(0.0, 1.0) - sensor.vignette * r2).clamp(0.0, 1.0);
                data[c * n + y * w + x] = v.powf(sensor.gamma);
            }
        }
    }
    TactileImage::new(w, h, data)
}

/// The zero-contact render.
pub fn background(sensor: &SensorModel) -> Result<TactileImage> {
    shade(&HeightMap::zeros(sensor.width(), sensor.height()), sensor)
}

/// Adds the sensor's pixel noise, clamping back to `[0, 1]`.
pub fn add_noise(raw: &TactileImage, sigma: f64, seed: u64) -> Result<TactileImage> {
    if sigma == 0.0 {
        return Ok(raw.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
    let mut rng = seeded(seed);
    let data = raw
        .data
        .iter()
        .map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    TactileImage::new(raw.width, raw.height, data)
}

pub fn subtract_background(raw: &TactileImage, background: &TactileImage) -> Result<TactileImage> {
    if !raw.same_size(background) {
        return Err(Error::Shape(format!(
            "image {}x{} and background {}x{} differ",
            raw.width, raw.height, background.width, background.height
        )));
    }
    let data = raw.data.iter().zip(&background.data).map(|(a, b)| a - b).collect();
    TactileImage::new(raw.width, raw.height, data)
}

pub fn add_background(image: &TactileImage, background: &TactileImage) -> Result<TactileImage> {
    if !image.same_size(background) {
        return Err(Error::Shape("image and background differ in size".into()));
    }
    let data = image.data.iter().zip(&background.data).map(|(a, b)| a + b).collect();
    TactileImage::new(image.width, image.height, data)
}

/// Full contact render: height map, shading, noise drawn from `noise_seed`,
/// and subtraction of the noise-free background.
pub fn render_contact(
    mesh: &TriangleMesh,
    pose: &ContactPose,
    sensor: &SensorModel,
    bg: &TactileImage,
    noise_seed: u64,
) -> Result<TactileImage> {
    let hm = render_heightmap(mesh, pose, sensor)?;
    let raw = add_noise(&shade(&hm, sensor)?, sensor.noise_sigma, noise_seed)?;
    subtract_background(&raw, bg)
}
