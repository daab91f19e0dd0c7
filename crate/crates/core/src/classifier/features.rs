use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network, Tensor};
use crate::tactile::TactileImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSpec {
    pub channels: usize,
    pub hidden: usize,
    pub kernel: usize,
    /// Average-pooling factor between the two convolutions; 1 disables it.
    pub pool: usize,
    pub dim: usize,
}

impl Default for ExtractorSpec {
    fn default() -> Self {
        Self {
            channels: 3,
            hidden: 32,
            kernel: 3,
            pool: 2,
            dim: 384,
        }
    }
}

impl ExtractorSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.channels == 0 || self.hidden == 0 || self.dim == 0 {
            v.push("classifier.extractor channels, hidden and dim must be positive".into());
        }
        if self.kernel.is_multiple_of(2) {
            v.push("classifier.extractor.kernel must be odd".into());
        }
        if self.pool == 0 {
            v.push("classifier.extractor.pool must be at least 1".into());
        }
        v
    }
}

/// Frozen image encoder: conv, GELU, average pool, conv, GELU, global mean
/// pool, affine. Weights are fixed by the seed and never updated.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    spec: ExtractorSpec,
    seed: u64,
    net: Network,
}

impl FeatureExtractor {
    pub fn new(spec: ExtractorSpec, seed: u64) -> Result<Self> {
        let v = spec.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let (c, h, k) = (spec.channels, spec.hidden, spec.kernel);
        let mut layers = vec![
            LayerSpec::Conv2d {
                in_channels: c,
                out_channels: h,
                kernel: k,
            },
            LayerSpec::Gelu,
        ];
        if spec.pool > 1 {
            layers.push(LayerSpec::AvgPool2d { size: spec.pool });
        }
        layers.extend([
            LayerSpec::Conv2d {
                in_channels: h,
                out_channels: 2 * h,
                kernel: k,
            },
            LayerSpec::Gelu,
            LayerSpec::MeanPool,
            LayerSpec::Affine {
                inputs: 2 * h,
                outputs: spec.dim,
            },
        ]);
        let net = Network::from_specs(&layers, seed)?;
        Ok(Self { spec, seed, net })
    }

    pub fn spec(&self) -> &ExtractorSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn param_hash(&self) -> String {
        self.net.param_hash()
    }

    /// Features of a batch tensor `[n, c, h, w]` as `[n, dim]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.spec.channels {
            return Err(Error::Shape(format!(
                "feature extractor expects [n, {}, h, w], got {s:?}",
                self.spec.channels
            )));
        }
        self.net.forward(x)
    }

    /// Features of many images, computed in chunks; the result does not
    /// depend on the chunking.
    pub fn extract(&self, images: &[TactileImage]) -> Result<Tensor> {
        use rayon::prelude::*;
        if images.is_empty() {
            return Ok(Tensor::zeros(vec![0, self.spec.dim]));
        }
        let parts = images
            .par_chunks(64)
            .map(|chunk| {
                let refs: Vec<&TactileImage> = chunk.iter().collect();
                self.forward(&TactileImage::batch_tensor(&refs)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let data: Vec<f64> = parts.into_iter().flat_map(Tensor::into_data).collect();
        Tensor::new(vec![images.len(), self.spec.dim], data)
    }
}
