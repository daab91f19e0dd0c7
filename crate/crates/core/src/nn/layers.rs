//! Layers with explicit forward and backward passes.
//!
//! `forward` is pure. `backward` receives the same input that was fed to
//! `forward` plus the upstream gradient, accumulates parameter gradients and
//! returns the gradient with respect to the input.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Serializable description of one layer; the architecture half of a
/// checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Affine {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Gelu,
    LayerNorm {
        dim: usize,
    },
    Flatten,
    MeanPool,
    /// Non-overlapping `size x size` average pooling; `h` and `w` must be
    /// multiples of `size`.
    AvgPool2d {
        size: usize,
    },
    /// Nearest-neighbor upsampling by an integer factor.
    Upsample2d {
        size: usize,
    },
    GradientReversal {
        alpha: f64,
    },
}

#[derive(Debug, Clone)]
pub enum Layer {
    Affine(Affine),
    Conv2d(Conv2d),
    Gelu,
    LayerNorm(LayerNorm),
    Flatten,
    MeanPool,
    AvgPool2d(usize),
    Upsample2d(usize),
    GradientReversal(GradientReversal),
}

/// Kaiming-uniform initialization with fan-in scaling, bound `sqrt(6 / fan_in)`.
fn kaiming_uniform(n: usize, fan_in: usize, rng: &mut Rng) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

impl Layer {
    pub fn build(spec: &LayerSpec, rng: &mut Rng) -> Result<Self> {
        Ok(match *spec {
            LayerSpec::Affine { inputs, outputs } => Layer::Affine(Affine::new(inputs, outputs, rng)?),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => Layer::Conv2d(Conv2d::new(in_channels, out_channels, kernel, rng)?),
            LayerSpec::Gelu => Layer::Gelu,
            LayerSpec::LayerNorm { dim } => Layer::LayerNorm(LayerNorm::new(dim)?),
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::MeanPool => Layer::MeanPool,
            LayerSpec::AvgPool2d { size } => {
                if size == 0 {
                    return Err(Error::InvalidArgument("pool size must be positive".into()));
                }
                Layer::AvgPool2d(size)
            }
            LayerSpec::Upsample2d { size } => {
                if size == 0 {
                    return Err(Error::InvalidArgument("upsample size must be positive".into()));
                }
                Layer::Upsample2d(size)
            }
            LayerSpec::GradientReversal { alpha } => Layer::GradientReversal(GradientReversal::new(alpha)?),
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Affine(a) => LayerSpec::Affine {
                inputs: a.inputs(),
                outputs: a.outputs(),
            },
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
            },
            Layer::Gelu => LayerSpec::Gelu,
            Layer::LayerNorm(l) => LayerSpec::LayerNorm { dim: l.dim },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::MeanPool => LayerSpec::MeanPool,
            Layer::AvgPool2d(size) => LayerSpec::AvgPool2d { size: *size },
            Layer::Upsample2d(size) => LayerSpec::Upsample2d { size: *size },
            Layer::GradientReversal(g) => LayerSpec::GradientReversal { alpha: g.alpha },
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Affine(a) => a.forward(x),
            Layer::Conv2d(c) => c.forward(x),
            Layer::Gelu => Ok(gelu_forward(x)),
            Layer::LayerNorm(l) => l.forward(x),
            Layer::Flatten => flatten(x),
            Layer::MeanPool => mean_pool_forward(x),
            Layer::AvgPool2d(size) => avg_pool_forward(x, *size),
            Layer::Upsample2d(size) => upsample_forward(x, *size),
            Layer::GradientReversal(g) => Ok(g.forward(x)),
        }
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Affine(a) => a.backward(x, grad_out),
            Layer::Conv2d(c) => c.backward(x, grad_out),
            Layer::Gelu => gelu_backward(x, grad_out),
            Layer::LayerNorm(l) => l.backward(x, grad_out),
            Layer::Flatten => grad_out.clone().reshape(x.shape().to_vec()),
            Layer::MeanPool => mean_pool_backward(x, grad_out),
            Layer::AvgPool2d(size) => avg_pool_backward(x, grad_out, *size),
            Layer::Upsample2d(size) => upsample_backward(x, grad_out, *size),
            Layer::GradientReversal(g) => Ok(g.backward(grad_out)),
        }
    }

    /// Named parameter tensors in a stable order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Affine(a) => vec![("weight", &a.weight), ("bias", &a.bias)],
            Layer::Conv2d(c) => vec![("weight", &c.weight), ("bias", &c.bias)],
            Layer::LayerNorm(l) => vec![("gain", &l.gain), ("shift", &l.shift)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Affine(a) => vec![&mut a.weight, &mut a.bias],
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::LayerNorm(l) => vec![&mut l.gain, &mut l.shift],
            _ => Vec::new(),
        }
    }
}

/// `y = x W^T + b` on `[batch, inputs]`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Affine {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidArgument("affine dims must be positive".into()));
        }
        let weight = Tensor::new(vec![outputs, inputs], kaiming_uniform(inputs * outputs, inputs, rng))?;
        Ok(Self {
            weight: weight.requires_grad(),
            bias: Tensor::zeros(vec![outputs]).requires_grad(),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() != 2 || x.shape()[1] != self.inputs() {
            return Err(Error::Shape(format!(
                "affine expects [batch, {}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let (i, o) = (self.inputs(), self.outputs());
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(self.bias.data());
        }
        gemm(n, i, o, 1.0, x.data(), false, self.weight.data(), true, 1.0, &mut out);
        Tensor::new(vec![n, o], out)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let (i, o) = (self.inputs(), self.outputs());
        grad_out.check_shape(&[n, o], "affine upstream gradient")?;
        let dy = grad_out.data();
        if let Some(gw) = self.weight.grad_mut() {
            gemm(o, n, i, 1.0, dy, true, x.data(), false, 1.0, gw);
        }
        if let Some(gb) = self.bias.grad_mut() {
            for row in dy.chunks_exact(o) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
        }
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, 1.0, dy, false, self.weight.data(), false, 0.0, &mut dx);
        Tensor::new(vec![n, i], dx)
    }
}

/// 2D convolution, stride 1, zero padding `kernel / 2` (same-size output).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut Rng) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "conv2d needs positive channels and an odd kernel".into(),
            ));
        }
        let fan_in = in_channels * kernel * kernel;
        let weight = Tensor::new(
            vec![out_channels, in_channels, kernel, kernel],
            kaiming_uniform(out_channels * fan_in, fan_in, rng),
        )?;
        Ok(Self {
            weight: weight.requires_grad(),
            bias: Tensor::zeros(vec![out_channels]).requires_grad(),
            in_channels,
            out_channels,
            kernel,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn dims(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.in_channels {
            return Err(Error::Shape(format!(
                "conv2d expects [batch, {}, h, w], got {s:?}",
                self.in_channels
            )));
        }
        Ok((s[0], s[2], s[3]))
    }

    fn im2col(&self, img: &[f64], h: usize, w: usize, cols: &mut [f64]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &img[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * hw..][..hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        let dst = &mut row[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        for (x, d) in dst.iter_mut().enumerate() {
                            let sx = x as isize + dx;
                            *d = if sx < 0 || sx >= w as isize { 0.0 } else { src[sx as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, img: &mut [f64]) {
        let k = self.kernel;
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &mut img[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((c * k + ky) * k + kx) * hw..][..hw];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let src = &row[y * w..(y + 1) * w];
                        let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                        for (x, s) in src.iter().enumerate() {
                            let sx = x as isize + dx;
                            if sx >= 0 && sx < w as isize {
                                dst[sx as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, h, w) = self.dims(x)?;
        let hw = h * w;
        let ckk = self.in_channels * self.kernel * self.kernel;
        let o = self.out_channels;
        let mut cols = vec![0.0; ckk * hw];
        let mut out = vec![0.0; n * o * hw];
        for (b, dst) in out.chunks_exact_mut(o * hw).enumerate() {
            self.im2col(x.item(b), h, w, &mut cols);
            for (ch, plane) in dst.chunks_exact_mut(hw).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.data()[ch]);
            }
            gemm(o, ckk, hw, 1.0, self.weight.data(), false, &cols, false, 1.0, dst);
        }
        Tensor::new(vec![n, o, h, w], out)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (n, h, w) = self.dims(x)?;
        let hw = h * w;
        let o = self.out_channels;
        grad_out.check_shape(&[n, o, h, w], "conv2d upstream gradient")?;
        let ckk = self.in_channels * self.kernel * self.kernel;
        let mut cols = vec![0.0; ckk * hw];
        let mut dcols = vec![0.0; ckk * hw];
        let mut dx = vec![0.0; x.len()];
        let item = self.in_channels * hw;
        for b in 0..n {
            let dy = &grad_out.data()[b * o * hw..(b + 1) * o * hw];
            self.im2col(x.item(b), h, w, &mut cols);
            if let Some(gw) = self.weight.grad_mut() {
                gemm(o, hw, ckk, 1.0, dy, false, &cols, true, 1.0, gw);
            }
            if let Some(gb) = self.bias.grad_mut() {
                for (g, plane) in gb.iter_mut().zip(dy.chunks_exact(hw)) {
                    *g += plane.iter().sum::<f64>();
                }
            }
            gemm(ckk, o, hw, 1.0, self.weight.data(), true, dy, false, 0.0, &mut dcols);
            self.col2im(&dcols, h, w, &mut dx[b * item..(b + 1) * item]);
        }
        Tensor::new(x.shape().to_vec(), dx)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

/// GELU, tanh approximation: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub fn gelu_derivative(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

fn gelu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| gelu(v)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn gelu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.check_shape(x.shape(), "gelu upstream gradient")?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| g * gelu_derivative(v))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Layer normalization over the last dimension of `[batch, dim]`, with a
/// learned per-feature gain and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub shift: Tensor,
    dim: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("layer norm dim must be positive".into()));
        }
        Ok(Self {
            gain: Tensor::new(vec![dim], vec![1.0; dim])?.requires_grad(),
            shift: Tensor::zeros(vec![dim]).requires_grad(),
            dim,
            eps: 1e-5,
        })
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.dim {
            return Err(Error::Shape(format!(
                "layer norm expects [batch, {}], got {:?}",
                self.dim,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Normalized row and the inverse standard deviation.
    fn normalize(&self, row: &[f64]) -> (Vec<f64>, f64) {
        let d = self.dim as f64;
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + self.eps).sqrt();
        (row.iter().map(|v| (v - mean) * inv).collect(), inv)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut out = Vec::with_capacity(x.len());
        for row in x.data().chunks_exact(self.dim) {
            let (xhat, _) = self.normalize(row);
            for ((v, g), s) in xhat.iter().zip(self.gain.data()).zip(self.shift.data()) {
                out.push(v * g + s);
            }
        }
        Tensor::new(x.shape().to_vec(), out)
    }

    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        grad_out.check_shape(x.shape(), "layer norm upstream gradient")?;
        let d = self.dim;
        let mut dx = Vec::with_capacity(x.len());
        let mut dgain = vec![0.0; d];
        let mut dshift = vec![0.0; d];
        for (row, dy) in x.data().chunks_exact(d).zip(grad_out.data().chunks_exact(d)) {
            let (xhat, inv) = self.normalize(row);
            let dxhat: Vec<f64> = dy.iter().zip(self.gain.data()).map(|(a, g)| a * g).collect();
            let sum_dxhat: f64 = dxhat.iter().sum();
            let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
            for j in 0..d {
                dgain[j] += dy[j] * xhat[j];
                dshift[j] += dy[j];
                dx.push(inv / d as f64 * (d as f64 * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat));
            }
        }
        if let Some(g) = self.gain.grad_mut() {
            g.iter_mut().zip(&dgain).for_each(|(a, b)| *a += b);
        }
        if let Some(g) = self.shift.grad_mut() {
            g.iter_mut().zip(&dshift).for_each(|(a, b)| *a += b);
        }
        Tensor::new(x.shape().to_vec(), dx)
    }
}

fn flatten(x: &Tensor) -> Result<Tensor> {
    let n = x.batch();
    x.clone().reshape(vec![n, x.item_len()])
}

fn mean_pool_forward(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("mean pool expects [batch, c, h, w], got {s:?}")));
    }
    let hw = s[2] * s[3];
    let data = x
        .data()
        .chunks_exact(hw)
        .map(|p| p.iter().sum::<f64>() / hw as f64)
        .collect();
    Tensor::new(vec![s[0], s[1]], data)
}

fn mean_pool_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    grad_out.check_shape(&s[..2], "mean pool upstream gradient")?;
    let hw = s[2] * s[3];
    let mut dx = Vec::with_capacity(x.len());
    for &g in grad_out.data() {
        dx.extend(std::iter::repeat_n(g / hw as f64, hw));
    }
    Tensor::new(s.to_vec(), dx)
}

fn pool_dims(x: &Tensor, size: usize) -> Result<(usize, usize, usize, usize)> {
    let s = x.shape();
    if s.len() != 4 || !s[2].is_multiple_of(size) || !s[3].is_multiple_of(size) {
        return Err(Error::Shape(format!(
            "avg pool {size} expects [batch, c, h, w] with h, w divisible by {size}, got {s:?}"
        )));
    }
    Ok((s[0] * s[1], s[2], s[3], size))
}

fn avg_pool_forward(x: &Tensor, size: usize) -> Result<Tensor> {
    let (planes, h, w, k) = pool_dims(x, size)?;
    let (oh, ow) = (h / k, w / k);
    let scale = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; planes * oh * ow];
    for (src, dst) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
        for y in 0..h {
            for xx in 0..w {
                dst[(y / k) * ow + xx / k] += src[y * w + xx] * scale;
            }
        }
    }
    let s = x.shape();
    Tensor::new(vec![s[0], s[1], oh, ow], out)
}

fn avg_pool_backward(x: &Tensor, grad_out: &Tensor, size: usize) -> Result<Tensor> {
    let (planes, h, w, k) = pool_dims(x, size)?;
    let (oh, ow) = (h / k, w / k);
    let s = x.shape();
    grad_out.check_shape(&[s[0], s[1], oh, ow], "avg pool upstream gradient")?;
    let scale = 1.0 / (k * k) as f64;
    let mut dx = vec![0.0; planes * h * w];
    for (g, dst) in grad_out.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
        for y in 0..h {
            for xx in 0..w {
                dst[y * w + xx] = g[(y / k) * ow + xx / k] * scale;
            }
        }
    }
    Tensor::new(s.to_vec(), dx)
}

fn upsample_forward(x: &Tensor, k: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("upsample expects [batch, c, h, w], got {s:?}")));
    }
    let (h, w) = (s[2], s[3]);
    let (oh, ow) = (h * k, w * k);
    let mut out = vec![0.0; s[0] * s[1] * oh * ow];
    for (src, dst) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
        for y in 0..oh {
            for xx in 0..ow {
                dst[y * ow + xx] = src[(y / k) * w + xx / k];
            }
        }
    }
    Tensor::new(vec![s[0], s[1], oh, ow], out)
}

fn upsample_backward(x: &Tensor, grad_out: &Tensor, k: usize) -> Result<Tensor> {
    let s = x.shape();
    let (h, w) = (s[2], s[3]);
    let (oh, ow) = (h * k, w * k);
    grad_out.check_shape(&[s[0], s[1], oh, ow], "upsample upstream gradient")?;
    let mut dx = vec![0.0; x.len()];
    for (g, dst) in grad_out.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
        for y in 0..oh {
            for xx in 0..ow {
                dst[(y / k) * w + xx / k] += g[y * ow + xx];
            }
        }
    }
    Tensor::new(s.to_vec(), dx)
}

/// Identity on the forward pass, multiplies the gradient by `-alpha` on the
/// backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReversal {
    pub alpha: f64,
}

impl GradientReversal {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gradient reversal coefficient must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.clone()
    }

    pub fn backward(&self, grad_out: &Tensor) -> Tensor {
        let data = grad_out.data().iter().map(|g| -(self.alpha * g)).collect();
        Tensor::new(grad_out.shape().to_vec(), data).expect("same shape")
    }
}
