use sha2::{Digest, Sha256};

use super::layers::{Layer, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Ordered layer stack built from specs and a deterministic init seed.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    seed: u64,
}

/// Inputs recorded by [`Network::forward_train`], one per layer.
#[derive(Debug, Clone)]
pub struct Activations {
    inputs: Vec<Tensor>,
    pub output: Tensor,
}

impl Network {
    pub fn from_specs(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let layers = specs
            .iter()
            .map(|s| Layer::build(s, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers, seed })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur)?;
            if !cur.is_finite() {
                return Err(Error::NonFinite(format!("output of layer {i}")));
            }
        }
        Ok(cur)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<Activations> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(&cur)?;
            if !next.is_finite() {
                return Err(Error::NonFinite(format!("output of layer {i}")));
            }
            inputs.push(cur);
            cur = next;
        }
        Ok(Activations { inputs, output: cur })
    }

    /// Backpropagate `grad_out` through the recorded activations, accumulating
    /// parameter gradients. Returns the gradient w.r.t. the network input.
    pub fn backward(&mut self, acts: &Activations, grad_out: &Tensor) -> Result<Tensor> {
        if acts.inputs.len() != self.layers.len() {
            return Err(Error::Shape("activations do not belong to this network".into()));
        }
        let mut grad = grad_out.clone();
        for (layer, x) in self.layers.iter_mut().zip(&acts.inputs).rev() {
            grad = layer.backward(x, &grad)?;
        }
        Ok(grad)
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.params()
                    .into_iter()
                    .map(move |(name, t)| (format!("layers.{i}.{name}"), t))
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    /// SHA-256 over parameter names, shapes and little-endian values.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.named_params() {
            h.update(name.as_bytes());
            for d in t.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Copy values from named tensors (as produced by `named_params`).
    pub fn load_params(&mut self, named: &[(String, Tensor)]) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != named.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} tensors, network has {}",
                named.len(),
                expected.len()
            )));
        }
        for ((name, shape), (cname, t)) in expected.iter().zip(named) {
            if name != cname || shape.as_slice() != t.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor {cname} {:?} does not match {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        for (p, (_, t)) in self.params_mut().into_iter().zip(named) {
            p.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }
}
