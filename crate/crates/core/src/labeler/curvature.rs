use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Ordered singular values of a neighborhood covariance and the curvature
/// level `s3 / (s1 + s2 + s3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureResult {
    pub singular_values: [f64; 3],
    pub curvature: f64,
}

impl CurvatureResult {
    pub fn from_singular_values(sv: [f64; 3]) -> Self {
        let sum = sv[0] + sv[1] + sv[2];
        let curvature = if sum > 0.0 { (sv[2] / sum).clamp(0.0, 1.0 / 3.0) } else { 0.0 };
        Self {
            singular_values: sv,
            curvature,
        }
    }
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
    let mut a = m;
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // A <- J^T A J with J the (p, q) rotation
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Curvature level of a neighborhood. The covariance of the mean-centered
/// points is normalized by `1 / (n - 1)`; being symmetric positive
/// semi-definite, its singular values are its eigenvalues.
pub fn local_curvature(points: &[Point3], min_points: usize) -> Result<CurvatureResult> {
    if points.len() < min_points.max(2) {
        return Err(Error::InsufficientNeighborhood {
            found: points.len(),
            required: min_points.max(2),
        });
    }
    let n = points.len() as f64;
    // shifting by the first point first keeps identical inputs exactly zero
    let origin = points[0];
    let mean = points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + (p - origin)) / n;
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let d = (p - origin) - mean;
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let ev = symmetric_eigenvalues(cov).map(|v| v.max(0.0));
    Ok(CurvatureResult::from_singular_values(ev))
}
