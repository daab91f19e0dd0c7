use serde::{Deserialize, Serialize};

use super::schedule::{forward_jump_with, normal_vec};
use super::{Denoiser, EpsPredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, OptimizerConfig, Tensor};
use crate::rng::{derive_seed, seeded, stream};
use crate::tactile::TactileImage;
use rand::Rng as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserTraining {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Images are multiplied by this before entering the chain, so that
    /// low-contrast background-subtracted images reach unit-order spread.
    pub data_scale: f64,
}

impl Default for DenoiserTraining {
    fn default() -> Self {
        Self {
            steps: 4000,
            batch_size: 16,
            optimizer: OptimizerConfig::adam(3e-3),
            data_scale: 9.0,
        }
    }
}

/// Trains on the simple objective `|eps - eps_hat(x_t, t)|^2` (mean over
/// elements) with `t` uniform in `1..=T`. Returns the per-step loss.
pub fn train_denoiser(
    images: &[TactileImage],
    schedule: &NoiseSchedule,
    net: &mut Denoiser,
    config: &DenoiserTraining,
    seed: u64,
) -> Result<Vec<f64>> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("denoiser training needs at least one image".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    check_scale(config.data_scale)?;
    let first = &images[0];
    if images.iter().any(|im| !im.same_size(first)) {
        return Err(Error::Shape("training images differ in size".into()));
    }
    let item = first.data.len();
    let shape = vec![config.batch_size, 3, first.height, first.width];
    let mut opt = Optimizer::new(config.optimizer);
    let mut curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut rng = stream(seed, step as u64);
        let mut x = Vec::with_capacity(config.batch_size * item);
        let mut eps_all = Vec::with_capacity(config.batch_size * item);
        let mut ts = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let im = &images[rng.random_range(0..images.len())];
            let t = rng.random_range(1..=schedule.timesteps());
            let eps = normal_vec(item, &mut rng);
            let x0: Vec<f64> = im.data.iter().map(|v| v * config.data_scale).collect();
            x.extend(forward_jump_with(&x0, &eps, t, schedule)?);
            eps_all.extend(eps);
            ts.push(t);
        }
        let x = Tensor::new(shape.clone(), x)?;
        net.zero_grad();
        let acts = net.forward_train(&x, &ts).map_err(|_| numerical(step))?;
        let n = eps_all.len() as f64;
        let mut loss = 0.0;
        let grad: Vec<f64> = acts
            .output()
            .data()
            .iter()
            .zip(&eps_all)
            .map(|(p, e)| {
                loss += (p - e) * (p - e);
                2.0 * (p - e) / n
            })
            .collect();
        loss /= n;
        if !loss.is_finite() {
            return Err(numerical(step));
        }
        net.backward(&acts, &Tensor::new(shape.clone(), grad)?)?;
        opt.step(net.params_mut())?;
        curve.push(loss);
        if step % 500 == 0 {
            log::debug!("denoiser step {step}: loss {loss:.4}");
        }
    }
    Ok(curve)
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("data scale must be positive, got {scale}")))
    }
}

fn numerical(step: usize) -> Error {
    Error::NonFinite(format!("denoiser training diverged at step {step}"))
}

/// Posterior mean `(x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t)`
/// plus `sqrt(beta_t) z` when `noise` is given.
pub fn reverse_step_with(
    x_t: &[f64],
    eps_hat: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    noise: Option<&[f64]>,
) -> Result<Vec<f64>> {
    schedule.check_t(t)?;
    if x_t.len() != eps_hat.len() || noise.is_some_and(|z| z.len() != x_t.len()) {
        return Err(Error::Shape("reverse step operands differ in length".into()));
    }
    let beta = schedule.beta(t);
    let coef = beta / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv = 1.0 / schedule.alpha(t).sqrt();
    let sigma = beta.sqrt();
    Ok(x_t
        .iter()
        .zip(eps_hat)
        .enumerate()
        .map(|(i, (x, e))| {
            let mu = inv * (x - coef * e);
            match noise {
                Some(z) => mu + sigma * z[i],
                None => mu,
            }
        })
        .collect())
}

/// One ancestral step on a batch; fresh noise for `t > 1`, none at `t = 1`.
pub fn reverse_step(
    x_t: &Tensor,
    t: usize,
    net: &dyn EpsPredictor,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<Tensor> {
    schedule.check_t(t)?;
    let eps_hat = net.predict_eps(x_t, &vec![t; x_t.batch()])?;
    let noise = (t > 1).then(|| normal_vec(x_t.len(), &mut seeded(seed)));
    let out = reverse_step_with(x_t.data(), eps_hat.data(), t, schedule, noise.as_deref())?;
    Tensor::new(x_t.shape().to_vec(), out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateConfig {
    /// Partial-noise level `T'`.
    pub t_prime: usize,
    /// Must match the scale the denoiser was trained with.
    pub data_scale: f64,
    pub batch_size: usize,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        Self {
            t_prime: 60,
            data_scale: 9.0,
            batch_size: 32,
        }
    }
}

/// Partial-noise translation: jump each (scaled) image to `t_prime`, run the
/// reverse chain down to 0, unscale and clamp to `[-1, 1]`. Every image
/// draws its noise from its own stream derived from `seed` and its index, so
/// results do not depend on the batch size.
pub fn translate(
    images: &[TactileImage],
    net: &dyn EpsPredictor,
    schedule: &NoiseSchedule,
    config: &TranslateConfig,
    seed: u64,
) -> Result<Vec<TactileImage>> {
    let (t_prime, scale) = (config.t_prime, config.data_scale);
    let batch_size = config.batch_size.max(1);
    check_scale(scale)?;
    if t_prime >= schedule.timesteps() {
        return Err(Error::InvalidArgument(format!(
            "partial-noise level {t_prime} must be below T = {}",
            schedule.timesteps()
        )));
    }
    if t_prime == 0 {
        return Ok(images.to_vec());
    }
    let mut out = Vec::with_capacity(images.len());
    for (chunk_idx, chunk) in images.chunks(batch_size).enumerate() {
        let base = chunk_idx * batch_size;
        let mut rngs: Vec<_> = (0..chunk.len())
            .map(|i| seeded(derive_seed(seed, (base + i) as u64)))
            .collect();
        let mut xs: Vec<Vec<f64>> = chunk
            .iter()
            .zip(&mut rngs)
            .map(|(im, rng)| {
                let x0: Vec<f64> = im.data.iter().map(|v| v * scale).collect();
                forward_jump_with(&x0, &normal_vec(x0.len(), rng), t_prime, schedule)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&TactileImage> = chunk.iter().collect();
        let shape = TactileImage::batch_tensor(&refs)?.shape().to_vec();
        let item = chunk[0].data.len();
        for t in (1..=t_prime).rev() {
            let x = Tensor::new(shape.clone(), xs.concat())?;
            let eps_hat = net.predict_eps(&x, &vec![t; chunk.len()])?;
            for (i, (xi, rng)) in xs.iter_mut().zip(&mut rngs).enumerate() {
                let noise = (t > 1).then(|| normal_vec(item, rng));
                *xi = reverse_step_with(xi, eps_hat.item(i), t, schedule, noise.as_deref())?;
            }
        }
        for (im, x) in chunk.iter().zip(xs) {
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("translated image".into()));
            }
            let x = x.into_iter().map(|v| v / scale).collect();
            out.push(TactileImage::new(im.width, im.height, x)?.clamped(-1.0, 1.0));
        }
    }
    Ok(out)
}
