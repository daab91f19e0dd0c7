//! Batch-mean losses returning the value and the gradient w.r.t. the logits.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Tensor,
}

/// Mean softmax cross-entropy over a `[batch, classes]` logit tensor.
/// Gradient per row is `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<LossOutput> {
    let s = logits.shape();
    if s.len() != 2 || s[0] != targets.len() || s[0] == 0 {
        return Err(Error::Shape(format!(
            "cross-entropy expects [{}, classes], got {s:?}",
            targets.len()
        )));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("cross-entropy logits".into()));
    }
    let (n, k) = (s[0], s[1]);
    let mut grad = Vec::with_capacity(n * k);
    let mut total = 0.0;
    for (row, &t) in logits.data().chunks_exact(k).zip(targets) {
        if t >= k {
            return Err(Error::InvalidArgument(format!(
                "class index {t} out of range for {k} classes"
            )));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[t];
        for (j, v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            grad.push((p - if j == t { 1.0 } else { 0.0 }) / n as f64);
        }
    }
    Ok(LossOutput {
        value: total / n as f64,
        grad: Tensor::new(s.to_vec(), grad)?,
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy on logits (one logit per batch item) against
/// labels in `{0, 1}`, in the stable form
/// `max(z, 0) - z y + ln(1 + exp(-|z|))`.
pub fn binary_cross_entropy(logits: &Tensor, labels: &[f64]) -> Result<LossOutput> {
    if logits.len() != labels.len() || labels.is_empty() || logits.len() != logits.batch() {
        return Err(Error::Shape(format!(
            "binary cross-entropy expects one logit per label ({}), got {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("binary cross-entropy logits".into()));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&z, &y) in logits.data().iter().zip(labels) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidArgument(format!("domain label must be 0 or 1, got {y}")));
        }
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - y) / n);
    }
    Ok(LossOutput {
        value: total / n,
        grad: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}
