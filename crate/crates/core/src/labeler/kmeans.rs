use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::Vector3;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vector3>,
    /// Mean squared distance of each vector to its assigned centroid.
    pub loss: f64,
}

fn nearest(v: &Vector3, centroids: &[Vector3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = (v - c).norm_squared();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, the rest drawn with probability
/// proportional to squared distance from the chosen set.
fn seed_centroids(vectors: &[Vector3], k: usize, rng: &mut crate::rng::Rng) -> Vec<Vector3> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())]];
    let mut d2: Vec<f64> = vectors.iter().map(|v| (v - centroids[0]).norm_squared()).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random_range(0.0..total);
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > r
                })
                .unwrap_or(vectors.len() - 1)
        } else {
            rng.random_range(0..vectors.len())
        };
        let c = vectors[pick];
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min((v - c).norm_squared());
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(vectors: &[Vector3], mut centroids: Vec<Vector3>, max_iters: usize) -> KMeansResult {
    let k = centroids.len();
    let mut assignments = vec![usize::MAX; vectors.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        for (a, v) in assignments.iter_mut().zip(vectors) {
            let (j, _) = nearest(v, &centroids);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![Vector3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (&a, v) in assignments.iter().zip(vectors) {
            sums[a] += v;
            counts[a] += 1;
        }
        for j in 0..k {
            // empty clusters keep their previous centroid
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    let loss = vectors
        .iter()
        .zip(&assignments)
        .map(|(v, &a)| (v - centroids[a]).norm_squared())
        .sum::<f64>()
        / vectors.len() as f64;
    KMeansResult {
        assignments,
        centroids,
        loss,
    }
}

/// Lloyd's algorithm with k-means++ seeding; best (lowest loss) of
/// `restarts` runs. Deterministic for a given seed.
pub fn kmeans(vectors: &[Vector3], k: usize, restarts: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("k-means on empty input".into()));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= k <= {}, got k = {k}",
            vectors.len()
        )));
    }
    let mut rng = seeded(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let init = seed_centroids(vectors, k, &mut rng);
        let run = lloyd(vectors, init, max_iters.max(1));
        if best.as_ref().is_none_or(|b| run.loss < b.loss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
