use crate::tactile::TactileImage;

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

/// Per-channel mean and standard deviation over all pixels of a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    pub fn of(images: &[&TactileImage]) -> Self {
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for c in 0..3 {
            let vals = images.iter().flat_map(|im| im.channel(c).iter().copied());
            let (mut n, mut s, mut ss) = (0.0, 0.0, 0.0);
            for v in vals {
                n += 1.0;
                s += v;
                ss += v * v;
            }
            if n > 0.0 {
                mean[c] = s / n;
                std[c] = (ss / n - mean[c] * mean[c]).max(0.0).sqrt();
            }
        }
        Self { mean, std }
    }

    /// Euclidean distance between the stacked `(mean, std)` vectors.
    pub fn distance(&self, other: &ChannelStats) -> f64 {
        (0..3)
            .map(|c| (self.mean[c] - other.mean[c]).powi(2) + (self.std[c] - other.std[c]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Mean over pairs of the distance between each image's own channel
/// statistics and those of its reference. `None` for empty or unequal sets.
pub fn paired_style_distance(images: &[TactileImage], references: &[TactileImage]) -> Option<f64> {
    if images.is_empty() || images.len() != references.len() {
        return None;
    }
    let total: f64 = images
        .iter()
        .zip(references)
        .map(|(a, b)| ChannelStats::of(&[a]).distance(&ChannelStats::of(&[b])))
        .sum();
    Some(total / images.len() as f64)
}
