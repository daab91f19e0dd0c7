//! OBJ / PLY mesh input and ascii PLY point-cloud output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::{Point3, SampleCloud, SurfaceSample, TriangleMesh, Vector3};
use crate::error::{Error, Result};

/// Load an OBJ or PLY (ascii / binary little-endian) triangle mesh, chosen by
/// file extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let (vertices, polygons) = match ext.as_str() {
        "obj" => read_obj(path)?,
        "ply" => read_ply_mesh(path)?,
        other => return Err(Error::parse(path, format!("unsupported mesh extension `{other}`"))),
    };
    TriangleMesh::from_polygons(vertices, &polygons).map_err(|e| match e {
        Error::Mesh(m) => Error::parse(path, m),
        e => e,
    })
}

fn read_obj(path: &Path) -> Result<(Vec<Point3>, Vec<Vec<usize>>)> {
    let opts = tobj::LoadOptions {
        triangulate: false,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for model in models {
        let m = model.mesh;
        let offset = vertices.len();
        vertices.extend(m.positions.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])));
        let mut start = 0usize;
        let arities: Vec<usize> = if m.face_arities.is_empty() {
            vec![3; m.indices.len() / 3]
        } else {
            m.face_arities.iter().map(|&a| a as usize).collect()
        };
        for a in arities {
            polygons.push(
                m.indices[start..start + a]
                    .iter()
                    .map(|&i| i as usize + offset)
                    .collect(),
            );
            start += a;
        }
    }
    Ok((vertices, polygons))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<usize>> {
    fn conv<T: Copy + TryInto<usize>>(v: &[T]) -> Option<Vec<usize>> {
        v.iter().map(|&x| x.try_into().ok()).collect()
    }
    match p {
        Property::ListChar(v) => conv(v),
        Property::ListUChar(v) => conv(v),
        Property::ListShort(v) => conv(v),
        Property::ListUShort(v) => conv(v),
        Property::ListInt(v) => conv(v),
        Property::ListUInt(v) => conv(v),
        _ => None,
    }
}

pub(crate) fn read_ply(path: &Path) -> Result<ply_rs::ply::Ply<DefaultElement>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    Parser::<DefaultElement>::new()
        .read_ply(&mut reader)
        .map_err(|e| Error::parse(path, e.to_string()))
}

pub(crate) fn get(el: &DefaultElement, key: &str, path: &Path) -> Result<f64> {
    el.get(key)
        .and_then(scalar)
        .ok_or_else(|| Error::parse(path, format!("vertex property `{key}` missing or not scalar")))
}

fn read_ply_mesh(path: &Path) -> Result<(Vec<Point3>, Vec<Vec<usize>>)> {
    let ply = read_ply(path)?;
    let verts = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::parse(path, "no vertex element"))?;
    let vertices = verts
        .iter()
        .map(|v| Ok(Point3::new(get(v, "x", path)?, get(v, "y", path)?, get(v, "z", path)?)))
        .collect::<Result<Vec<_>>>()?;
    let faces = ply.payload.get("face").map(Vec::as_slice).unwrap_or(&[]);
    let polygons = faces
        .iter()
        .map(|f| {
            f.get("vertex_indices")
                .or_else(|| f.get("vertex_index"))
                .and_then(index_list)
                .ok_or_else(|| Error::parse(path, "face without a vertex index list"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vertices, polygons))
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        for v in mesh.vertices() {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for [a, b, c] in mesh.faces() {
            writeln!(w, "f {} {} {}", a + 1, b + 1, c + 1)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Ascii PLY with `x y z nx ny nz` per vertex; `min_distance` is kept in a
/// header comment.
pub fn write_cloud_ply(cloud: &SampleCloud, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "ply\nformat ascii 1.0")?;
        writeln!(w, "comment min_distance {}", cloud.min_distance())?;
        writeln!(w, "element vertex {}", cloud.len())?;
        for p in ["x", "y", "z", "nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
        writeln!(w, "end_header")?;
        for s in cloud.samples() {
            let (p, n) = (s.position, s.normal);
            writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_cloud_ply(path: &Path) -> Result<SampleCloud> {
    let ply = read_ply(path)?;
    let min_distance = ply
        .header
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("min_distance ")?.trim().parse::<f64>().ok())
        .unwrap_or(0.0);
    let verts = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::parse(path, "no vertex element"))?;
    let samples = verts
        .iter()
        .map(|v| {
            Ok(SurfaceSample {
                position: Point3::new(get(v, "x", path)?, get(v, "y", path)?, get(v, "z", path)?),
                normal: Vector3::new(get(v, "nx", path)?, get(v, "ny", path)?, get(v, "nz", path)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SampleCloud::new(samples, min_distance)
}
