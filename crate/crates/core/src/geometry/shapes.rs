//! Closed primitive meshes with outward normals.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{Point3, TriangleMesh};

/// Axis-aligned cube centered at the origin.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let v: Vec<Point3> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let quads = [
        vec![0, 2, 3, 1], // -z
        vec![4, 5, 7, 6], // +z
        vec![0, 1, 5, 4], // -y
        vec![2, 6, 7, 3], // +y
        vec![0, 4, 6, 2], // -x
        vec![1, 3, 7, 5], // +x
    ];
    TriangleMesh::from_polygons(v, &quads).expect("cube is valid")
}

/// Subdivided icosahedron projected onto a sphere centered at the origin.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(nalgebra::Vector3::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = (verts[a].coords + verts[b].coords).normalize();
                verts.push(Point3::from(m));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|p| Point3::from(p.coords * radius)).collect();
    TriangleMesh::from_triangles(verts, &faces).expect("icosphere is valid")
}

/// Closed cylinder along z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let h = height / 2.0;
    let mut verts = Vec::with_capacity(2 * segments + 2);
    for z in [-h, h] {
        for k in 0..segments {
            let a = k as f64 * TAU / segments as f64;
            verts.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom_center = verts.len();
    verts.push(Point3::new(0.0, 0.0, -h));
    let top_center = verts.len();
    verts.push(Point3::new(0.0, 0.0, h));
    let mut faces = Vec::with_capacity(4 * segments);
    for k in 0..segments {
        let n = (k + 1) % segments;
        let (b0, b1, t0, t1) = (k, n, k + segments, n + segments);
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
        faces.push([bottom_center, b1, b0]);
        faces.push([top_center, t0, t1]);
    }
    TriangleMesh::from_triangles(verts, &faces).expect("cylinder is valid")
}

/// Square in the z = 0 plane with normal +z.
pub fn plane(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let v = vec![
        Point3::new(-h, -h, 0.0),
        Point3::new(h, -h, 0.0),
        Point3::new(h, h, 0.0),
        Point3::new(-h, h, 0.0),
    ];
    TriangleMesh::from_polygons(v, &[vec![0, 1, 2, 3]]).expect("plane is valid")
}
