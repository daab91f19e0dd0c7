use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Penetration heights in meters, row-major `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl HeightMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// RGB image stored as three planes (`[3, height, width]`, channel-major).
/// Raw renders lie in `[0, 1]`; background-subtracted images in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl TactileImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::Shape(format!(
                "image {width}x{height} needs {} values, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; 3 * width * height],
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[c * self.pixels() + y * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_size(&self, other: &TactileImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn channel_means(&self) -> [f64; 3] {
        let n = self.pixels() as f64;
        [0, 1, 2].map(|c| self.channel(c).iter().sum::<f64>() / n)
    }

    pub fn clamped(mut self, lo: f64, hi: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        self
    }

    /// Stacks images into a `[n, 3, h, w]` tensor.
    pub fn batch_tensor(images: &[&TactileImage]) -> Result<Tensor> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty image batch".into()))?;
        let mut data = Vec::with_capacity(images.len() * first.data.len());
        for im in images {
            if !im.same_size(first) {
                return Err(Error::Shape("images in a batch differ in size".into()));
            }
            data.extend_from_slice(&im.data);
        }
        Tensor::new(vec![images.len(), 3, first.height, first.width], data)
    }

    /// Splits a `[n, 3, h, w]` tensor back into images.
    pub fn from_batch_tensor(t: &Tensor) -> Result<Vec<TactileImage>> {
        let s = t.shape();
        if s.len() != 4 || s[1] != 3 {
            return Err(Error::Shape(format!("expected [n, 3, h, w], got {s:?}")));
        }
        (0..s[0])
            .map(|i| TactileImage::new(s[3], s[2], t.item(i).to_vec()))
            .collect()
    }

    /// Signed values in `[-1, 1]` to bytes: `round((v + 1) / 2 * 255)`.
    pub fn to_bytes_signed(&self) -> Vec<u8> {
        let n = self.pixels();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                let v = self.data[c * n + i].clamp(-1.0, 1.0);
                out.push(((v + 1.0) / 2.0 * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn from_bytes_signed(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let n = width * height;
        if bytes.len() != 3 * n {
            return Err(Error::Shape(format!("expected {} bytes, got {}", 3 * n, bytes.len())));
        }
        let mut data = vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                data[c * n + i] = bytes[3 * i + c] as f64 / 255.0 * 2.0 - 1.0;
            }
        }
        Self::new(width, height, data)
    }

    /// Binary PPM (P6), signed-value mapping.
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)
            .and_then(|_| w.write_all(&self.to_bytes_signed()))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let mut tokens = Vec::new();
        let mut line = String::new();
        while tokens.len() < 4 {
            line.clear();
            if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                return Err(Error::parse(path, "truncated PPM header"));
            }
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P6" || tokens.len() != 4 {
            return Err(Error::parse(path, "expected a binary P6 header on separate lines"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, format!("bad header value `{s}`")));
        let (w, h, max) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
        if max != 255 {
            return Err(Error::parse(path, "only 8-bit PPM is supported"));
        }
        let mut bytes = Vec::with_capacity(3 * w * h);
        r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        if bytes.len() != 3 * w * h {
            return Err(Error::parse(path, "pixel data length does not match header"));
        }
        Self::from_bytes_signed(w, h, &bytes)
    }
}
