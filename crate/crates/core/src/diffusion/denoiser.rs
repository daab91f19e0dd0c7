use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, save_checkpoint, Activations, LayerSpec, Network, Tensor};
use crate::rng::derive_seed;

/// Anything that predicts the noise in `x_t`. `ts` holds one timestep per
/// batch item.
pub trait EpsPredictor {
    fn predict_eps(&self, x: &Tensor, ts: &[usize]) -> Result<Tensor>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSpec {
    pub channels: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub embed_dim: usize,
    /// Adds a half-resolution branch (pool, two convolutions, upsample) in
    /// parallel with the modulated features. Needs even image sizes.
    pub down_path: bool,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        Self {
            channels: 3,
            hidden: 16,
            kernel: 3,
            embed_dim: 32,
            down_path: true,
        }
    }
}

impl DenoiserSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.channels == 0 || self.hidden == 0 {
            v.push("diffusion.denoiser channels and hidden must be positive".into());
        }
        if self.kernel.is_multiple_of(2) {
            v.push("diffusion.denoiser.kernel must be odd".into());
        }
        if self.embed_dim < 2 || !self.embed_dim.is_multiple_of(2) {
            v.push("diffusion.denoiser.embed_dim must be even and >= 2".into());
        }
        v
    }
}

/// Sinusoidal timestep features: `sin(t w_k)` then `cos(t w_k)` with
/// `w_k = 10000^(-k / (dim / 2))`.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let w = (-(10000f64.ln()) * k as f64 / half as f64).exp();
        out[k] = (t as f64 * w).sin();
        out[k + half] = (t as f64 * w).cos();
    }
    out
}

/// Small convolutional noise predictor. Two convolutions, then a per-channel
/// scale and shift from the timestep embedding, an optional half-resolution
/// branch, then GELU and two more convolutions. The embedding also sets a per-channel gain on a direct path
/// from the input to the output.
#[derive(Debug, Clone)]
pub struct Denoiser {
    spec: DenoiserSpec,
    seed: u64,
    head: Network,
    embed: Network,
    down: Option<Network>,
    tail: Network,
}

pub struct DenoiserActivations {
    input: Tensor,
    head: Activations,
    embed: Activations,
    down: Option<Activations>,
    tail: Activations,
    output: Tensor,
}

impl DenoiserActivations {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl Denoiser {
    pub fn new(spec: DenoiserSpec, seed: u64) -> Result<Self> {
        let v = spec.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let (c, h, k) = (spec.channels, spec.hidden, spec.kernel);
        let conv = |i, o| LayerSpec::Conv2d {
            in_channels: i,
            out_channels: o,
            kernel: k,
        };
        let head = Network::from_specs(&[conv(c, h), LayerSpec::Gelu, conv(h, h)], derive_seed(seed, 0))?;
        let embed = Network::from_specs(
            &[LayerSpec::Affine {
                inputs: spec.embed_dim,
                outputs: 2 * h + c,
            }],
            derive_seed(seed, 1),
        )?;
        let tail = Network::from_specs(
            &[LayerSpec::Gelu, conv(h, h), LayerSpec::Gelu, conv(h, c)],
            derive_seed(seed, 2),
        )?;
        let down = if spec.down_path {
            Some(Network::from_specs(
                &[
                    LayerSpec::AvgPool2d { size: 2 },
                    conv(h, 2 * h),
                    LayerSpec::Gelu,
                    conv(2 * h, 2 * h),
                    LayerSpec::Gelu,
                    LayerSpec::Upsample2d { size: 2 },
                    conv(2 * h, h),
                ],
                derive_seed(seed, 3),
            )?)
        } else {
            None
        };
        Ok(Self {
            spec,
            seed,
            head,
            embed,
            down,
            tail,
        })
    }

    pub fn spec(&self) -> &DenoiserSpec {
        &self.spec
    }

    fn embeddings(&self, ts: &[usize]) -> Result<Tensor> {
        let d = self.spec.embed_dim;
        let data = ts.iter().flat_map(|&t| timestep_embedding(t, d)).collect();
        Tensor::new(vec![ts.len(), d], data)
    }

    /// `h * (1 + scale) + shift`, with scale and shift read from the first
    /// `2c` entries of each embedding row.
    fn modulate(h: &Tensor, film: &Tensor) -> Result<Tensor> {
        let s = h.shape();
        let (n, c) = (s[0], s[1]);
        let hw = s[2] * s[3];
        let width = film.shape()[1];
        let mut data = h.data().to_vec();
        for b in 0..n {
            let row = &film.data()[b * width..][..width];
            for ch in 0..c {
                let (scale, shift) = (row[ch], row[c + ch]);
                data[(b * c + ch) * hw..][..hw]
                    .iter_mut()
                    .for_each(|x| *x = *x * (1.0 + scale) + shift);
            }
        }
        Tensor::new(s.to_vec(), data)
    }

    /// Adds `gain * x` per channel, the gains being the last `c` entries of
    /// each embedding row.
    fn add_skip(out: &Tensor, x: &Tensor, film: &Tensor) -> Result<Tensor> {
        let s = out.shape();
        let (n, c) = (s[0], s[1]);
        let hw = s[2] * s[3];
        let width = film.shape()[1];
        let mut data = out.data().to_vec();
        for b in 0..n {
            for ch in 0..c {
                let g = film.data()[b * width + width - c + ch];
                let at = (b * c + ch) * hw;
                for (o, xi) in data[at..at + hw].iter_mut().zip(&x.data()[at..at + hw]) {
                    *o += g * xi;
                }
            }
        }
        Tensor::new(s.to_vec(), data)
    }

    fn sum(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        Tensor::new(a.shape().to_vec(), data)
    }

    fn check(&self, x: &Tensor, ts: &[usize]) -> Result<()> {
        let s = x.shape();
        let odd = self.spec.down_path && s.len() == 4 && (!s[2].is_multiple_of(2) || !s[3].is_multiple_of(2));
        if s.len() != 4 || s[1] != self.spec.channels || s[0] != ts.len() || odd {
            return Err(Error::Shape(format!(
                "denoiser expects [{}, {}, h, w], got {s:?}",
                ts.len(),
                self.spec.channels
            )));
        }
        Ok(())
    }

    pub fn forward_train(&self, x: &Tensor, ts: &[usize]) -> Result<DenoiserActivations> {
        self.check(x, ts)?;
        let head = self.head.forward_train(x)?;
        let embed = self.embed.forward_train(&self.embeddings(ts)?)?;
        let mid = Self::modulate(&head.output, &embed.output)?;
        let (down, merged) = match &self.down {
            Some(net) => {
                let acts = net.forward_train(&mid)?;
                let merged = Self::sum(&mid, &acts.output)?;
                (Some(acts), merged)
            }
            None => (None, mid),
        };
        let tail = self.tail.forward_train(&merged)?;
        let output = Self::add_skip(&tail.output, x, &embed.output)?;
        Ok(DenoiserActivations {
            input: x.clone(),
            head,
            embed,
            down,
            tail,
            output,
        })
    }

    pub fn backward(&mut self, acts: &DenoiserActivations, grad_out: &Tensor) -> Result<()> {
        let mut g_mid = self.tail.backward(&acts.tail, grad_out)?;
        if let (Some(net), Some(a)) = (self.down.as_mut(), acts.down.as_ref()) {
            let g_down = net.backward(a, &g_mid)?;
            g_mid = Self::sum(&g_mid, &g_down)?;
        }
        let h = &acts.head.output;
        let film = &acts.embed.output;
        let s = g_mid.shape().to_vec();
        let (n, hc, hw) = (s[0], s[1], s[2] * s[3]);
        let c = grad_out.shape()[1];
        let width = film.shape()[1];
        let mut g_film = vec![0.0; n * width];
        let mut g_head = g_mid.data().to_vec();
        for b in 0..n {
            for ch in 0..hc {
                let at = (b * hc + ch) * hw;
                let gm = &g_mid.data()[at..at + hw];
                let hv = &h.data()[at..at + hw];
                g_film[b * width + ch] = gm.iter().zip(hv).map(|(g, x)| g * x).sum();
                g_film[b * width + hc + ch] = gm.iter().sum();
                let k = 1.0 + film.data()[b * width + ch];
                g_head[at..at + hw].iter_mut().for_each(|g| *g *= k);
            }
            for ch in 0..c {
                let at = (b * c + ch) * hw;
                g_film[b * width + 2 * hc + ch] = grad_out.data()[at..at + hw]
                    .iter()
                    .zip(&acts.input.data()[at..at + hw])
                    .map(|(g, x)| g * x)
                    .sum();
            }
        }
        self.embed.backward(&acts.embed, &Tensor::new(vec![n, width], g_film)?)?;
        self.head.backward(&acts.head, &Tensor::new(s, g_head)?)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.head.zero_grad();
        self.embed.zero_grad();
        if let Some(d) = self.down.as_mut() {
            d.zero_grad();
        }
        self.tail.zero_grad();
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.head.params_mut();
        p.extend(self.embed.params_mut());
        if let Some(d) = self.down.as_mut() {
            p.extend(d.params_mut());
        }
        p.extend(self.tail.params_mut());
        p
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, net) in self.groups() {
            out.extend(net.named_params().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out
    }

    fn groups(&self) -> Vec<(&'static str, &Network)> {
        let mut g = vec![("head", &self.head), ("embed", &self.embed)];
        if let Some(d) = &self.down {
            g.push(("down", d));
        }
        g.push(("tail", &self.tail));
        g
    }

    pub fn param_hash(&self) -> String {
        self.groups()
            .iter()
            .map(|(_, n)| n.param_hash())
            .collect::<Vec<_>>()
            .join("")
    }

    /// Writes weights plus a sidecar with the spec, init seed and `extra`.
    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let arch = serde_json::json!({
            "kind": "denoiser",
            "spec": self.spec,
            "seed": self.seed,
            "extra": extra,
        });
        save_checkpoint(path, &self.named_params(), &arch)
    }

    /// Returns the denoiser and the sidecar's `extra` value.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let ck = load_checkpoint(path)?;
        let arch = &ck.architecture;
        if arch["kind"] != "denoiser" {
            return Err(Error::parse(path, "checkpoint is not a denoiser"));
        }
        let spec: DenoiserSpec =
            serde_json::from_value(arch["spec"].clone()).map_err(|e| Error::parse(path, e.to_string()))?;
        let seed = arch["seed"].as_u64().unwrap_or(0);
        let mut net = Self::new(spec, seed)?;
        let mut groups: [Vec<(String, Tensor)>; 4] = Default::default();
        for (name, t) in ck.tensors {
            let (prefix, rest) = name
                .split_once('.')
                .ok_or_else(|| Error::parse(path, format!("bad tensor name {name}")))?;
            let g = match prefix {
                "head" => 0,
                "embed" => 1,
                "tail" => 2,
                "down" => 3,
                _ => return Err(Error::parse(path, format!("unknown tensor group {prefix}"))),
            };
            groups[g].push((rest.to_owned(), t));
        }
        net.head.load_params(&groups[0])?;
        net.embed.load_params(&groups[1])?;
        net.tail.load_params(&groups[2])?;
        match net.down.as_mut() {
            Some(d) => d.load_params(&groups[3])?,
            None if !groups[3].is_empty() => {
                return Err(Error::parse(path, "checkpoint has a down path the spec lacks"));
            }
            None => {}
        }
        Ok((net, arch["extra"].clone()))
    }
}

impl EpsPredictor for Denoiser {
    fn predict_eps(&self, x: &Tensor, ts: &[usize]) -> Result<Tensor> {
        self.check(x, ts)?;
        let head = self.head.forward(x)?;
        let film = self.embed.forward(&self.embeddings(ts)?)?;
        let mut mid = Self::modulate(&head, &film)?;
        if let Some(d) = &self.down {
            mid = Self::sum(&mid, &d.forward(&mid)?)?;
        }
        let out = self.tail.forward(&mid)?;
        Self::add_skip(&out, x, &film)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_layout() {
        let e = timestep_embedding(3, 8);
        assert_eq!(e[0], 3f64.sin());
        assert_eq!(e[4], 3f64.cos());
        assert_eq!(timestep_embedding(0, 4), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn train_and_inference_forward_agree() {
        let net = Denoiser::new(DenoiserSpec::default(), 5).unwrap();
        let x = Tensor::new(vec![2, 3, 8, 8], (0..384).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let ts = [4, 150];
        let a = net.forward_train(&x, &ts).unwrap();
        assert_eq!(a.output(), &net.predict_eps(&x, &ts).unwrap());
        assert!(net.predict_eps(&x, &[1]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        for down_path in [false, true] {
            let spec = DenoiserSpec {
                hidden: 4,
                embed_dim: 8,
                down_path,
                ..Default::default()
            };
            check_gradients(Denoiser::new(spec, 2).unwrap());
        }
    }

    fn check_gradients(mut net: Denoiser) {
        let x = Tensor::new(vec![2, 3, 4, 4], (0..96).map(|i| (i as f64 * 0.71).cos()).collect()).unwrap();
        let ts = [3, 120];
        let w: Vec<f64> = (0..96).map(|i| (i as f64 * 0.43).sin()).collect();
        let loss = |n: &Denoiser| -> f64 {
            let out = n.predict_eps(&x, &ts).unwrap();
            out.data().iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        // a nonzero film so the scale and skip paths carry signal
        for v in net.embed.params_mut()[1].data_mut().iter_mut() {
            *v = 0.3;
        }
        net.zero_grad();
        let acts = net.forward_train(&x, &ts).unwrap();
        net.backward(&acts, &Tensor::new(vec![2, 3, 4, 4], w.clone()).unwrap()).unwrap();
        let analytic: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad().unwrap().to_vec()).collect();
        let h = 1e-6;
        for (pi, grads) in analytic.iter().enumerate() {
            for j in (0..grads.len()).step_by(grads.len() / 5 + 1) {
                let orig = net.params_mut()[pi].data()[j];
                net.params_mut()[pi].data_mut()[j] = orig + h;
                let up = loss(&net);
                net.params_mut()[pi].data_mut()[j] = orig - h;
                let down = loss(&net);
                net.params_mut()[pi].data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                assert!(
                    (numeric - grads[j]).abs() <= 1e-5 * (1.0 + numeric.abs()),
                    "param {pi}[{j}]: {numeric} vs {}",
                    grads[j]
                );
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ckpt");
        let net = Denoiser::new(DenoiserSpec::default(), 8).unwrap();
        net.save(&p, serde_json::json!({"t": 1})).unwrap();
        let (back, extra) = Denoiser::load(&p).unwrap();
        assert_eq!(back.param_hash(), net.param_hash());
        assert_eq!(extra["t"], 1);
    }
}
