use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ply_rs::ply::Property;

use super::{CurvatureResult, LabeledCloud, SurfaceLabel};
use crate::error::{Error, Result};
use crate::geometry::io::{get, read_ply};
use crate::geometry::{Point3, SampleCloud, SurfaceSample, Vector3};

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn curvature_value(c: &Option<CurvatureResult>) -> f64 {
    c.map_or(f64::NAN, |c| c.curvature)
}

/// Ascii PLY: `x y z nx ny nz label red green blue curvature`. Inherited
/// labels have curvature `nan`.
pub fn write_labeled_ply(labeled: &LabeledCloud, path: &Path) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "ply\nformat ascii 1.0")?;
        writeln!(w, "comment min_distance {}", labeled.cloud.min_distance())?;
        writeln!(w, "element vertex {}", labeled.len())?;
        for p in ["x", "y", "z", "nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
        writeln!(w, "property uchar label")?;
        for p in ["red", "green", "blue"] {
            writeln!(w, "property uchar {p}")?;
        }
        writeln!(w, "property double curvature\nend_header")?;
        for ((s, l), c) in labeled.cloud.samples().iter().zip(&labeled.labels).zip(&labeled.curvatures) {
            let (p, n) = (s.position, s.normal);
            let [r, g, b] = l.color();
            writeln!(
                w,
                "{} {} {} {} {} {} {} {r} {g} {b} {}",
                p.x,
                p.y,
                p.z,
                n.x,
                n.y,
                n.z,
                l.code(),
                curvature_value(c)
            )?;
        }
        Ok(())
    })
}

pub fn write_labeled_csv(labeled: &LabeledCloud, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["index", "x", "y", "z", "curvature", "label"])?;
        for (i, (s, (l, c))) in labeled
            .cloud
            .samples()
            .iter()
            .zip(labeled.labels.iter().zip(&labeled.curvatures))
            .enumerate()
        {
            let p = s.position;
            w.serialize((i, p.x, p.y, p.z, curvature_value(c), l.name()))?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads a file written by [`write_labeled_ply`]. Only labels and
/// curvature levels are restored; singular values are not stored.
pub fn read_labeled_ply(path: &Path) -> Result<LabeledCloud> {
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
    let mut samples = Vec::with_capacity(verts.len());
    let mut labels = Vec::with_capacity(verts.len());
    let mut curvatures = Vec::with_capacity(verts.len());
    for v in verts {
        samples.push(SurfaceSample {
            position: Point3::new(get(v, "x", path)?, get(v, "y", path)?, get(v, "z", path)?),
            normal: Vector3::new(get(v, "nx", path)?, get(v, "ny", path)?, get(v, "nz", path)?),
        });
        let code = match v.get("label") {
            Some(Property::UChar(c)) => *c,
            _ => return Err(Error::parse(path, "vertex property `label` missing")),
        };
        labels.push(
            SurfaceLabel::from_code(code).ok_or_else(|| Error::parse(path, format!("invalid label code {code}")))?,
        );
        let c = get(v, "curvature", path)?;
        curvatures.push((!c.is_nan()).then_some(CurvatureResult {
            singular_values: [f64::NAN; 3],
            curvature: c,
        }));
    }
    Ok(LabeledCloud {
        cloud: SampleCloud::new(samples, min_distance)?,
        labels,
        curvatures,
    })
}
