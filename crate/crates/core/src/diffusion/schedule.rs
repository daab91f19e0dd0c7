use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 200,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.timesteps < 1 {
            v.push("diffusion.schedule.timesteps must be >= 1".into());
        }
        if !(self.beta_start > 0.0 && self.beta_start <= self.beta_end && self.beta_end < 1.0) {
            v.push(format!(
                "diffusion.schedule needs 0 < beta_start <= beta_end < 1, got {} and {}",
                self.beta_start, self.beta_end
            ));
        }
        v
    }
}

/// Variance schedule, indexed by `t` in `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear `beta` from `beta_start` at `t = 1` to `beta_end` at `t = T`.
    pub fn linear(config: &ScheduleConfig) -> Result<Self> {
        let v = config.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let t = config.timesteps;
        let betas = (0..t)
            .map(|i| {
                if t == 1 {
                    config.beta_start
                } else {
                    config.beta_start + (config.beta_end - config.beta_start) * i as f64 / (t - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    /// Any betas in `[0, 1]`; degenerate values are allowed for testing.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || !betas.iter().all(|b| (0.0..=1.0).contains(b)) {
            return Err(Error::InvalidArgument("betas must be a nonempty list in [0, 1]".into()));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn timesteps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.timesteps() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside 1..={}",
                self.timesteps()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    /// Cumulative product of `alpha` up to `t`; 1 at `t = 0`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }
}

pub(crate) fn normal_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One noising transition `x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps`.
pub fn forward_step(x_prev: &[f64], t: usize, schedule: &NoiseSchedule, seed: u64) -> Result<Vec<f64>> {
    schedule.check_t(t)?;
    let eps = normal_vec(x_prev.len(), &mut seeded(seed));
    let (a, b) = (schedule.alpha(t).sqrt(), schedule.beta(t).sqrt());
    Ok(x_prev.iter().zip(&eps).map(|(x, e)| a * x + b * e).collect())
}

/// `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps` for a given `eps`.
pub fn forward_jump_with(x0: &[f64], eps: &[f64], t: usize, schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    schedule.check_t(t)?;
    if x0.len() != eps.len() {
        return Err(Error::Shape("x0 and noise differ in length".into()));
    }
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// Closed-form jump to `x_t` with one Gaussian draw.
pub fn forward_jump(x0: &[f64], t: usize, schedule: &NoiseSchedule, seed: u64) -> Result<Vec<f64>> {
    let eps = normal_vec(x0.len(), &mut seeded(seed));
    forward_jump_with(x0, &eps, t, schedule)
}
