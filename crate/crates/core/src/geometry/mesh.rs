use log::warn;

use super::{Point3, Vector3};
use crate::error::{Error, Result};

/// Triangle mesh with per-face unit normals (right-hand winding).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vector3>,
}

impl TriangleMesh {
    /// Build a mesh from polygons. Polygons with more than three corners are
    /// fan-triangulated around their first vertex; zero-area triangles are
    /// dropped with a warning.
    pub fn from_polygons(vertices: Vec<Point3>, polygons: &[Vec<usize>]) -> Result<Self> {
        let mut faces = Vec::new();
        let mut normals = Vec::new();
        let mut dropped = 0usize;
        for poly in polygons {
            if poly.len() < 3 {
                return Err(Error::Mesh(format!("face with {} vertices", poly.len())));
            }
            if let Some(&bad) = poly.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "face index {bad} out of range for {} vertices",
                    vertices.len()
                )));
            }
            for k in 1..poly.len() - 1 {
                let tri = [poly[0], poly[k], poly[k + 1]];
                match face_normal(&vertices, tri) {
                    Some(n) => {
                        faces.push(tri);
                        normals.push(n);
                    }
                    None => dropped += 1,
                }
            }
        }
        if dropped > 0 {
            warn!("dropped {dropped} degenerate triangle(s)");
        }
        if faces.is_empty() {
            return Err(Error::Mesh(if dropped > 0 {
                "all faces are degenerate".into()
            } else {
                "mesh has no faces".into()
            }));
        }
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    pub fn from_triangles(vertices: Vec<Point3>, faces: &[[usize; 3]]) -> Result<Self> {
        let polys: Vec<Vec<usize>> = faces.iter().map(|f| f.to_vec()).collect();
        Self::from_polygons(vertices, &polys)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vector3] {
        &self.normals
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn centroid(&self, face: usize) -> Point3 {
        let [a, b, c] = self.triangle(face);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Diagonal of the axis-aligned bounding box of the referenced vertices.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for f in &self.faces {
            for &i in f {
                let p = self.vertices[i];
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        (lo, hi)
    }

    /// Uniformly scale about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| Point3::from(p.coords * s)).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }
}

fn face_normal(vertices: &[Point3], [a, b, c]: [usize; 3]) -> Option<Vector3> {
    let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
    let e1 = pb - pa;
    let e2 = pc - pa;
    let n = e1.cross(&e2);
    let scale = e1.norm_squared().max(e2.norm_squared());
    let len = n.norm();
    if !len.is_finite() || len <= 1e-12 * scale || len == 0.0 {
        return None;
    }
    Some(n / len)
}
