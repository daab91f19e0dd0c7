use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::SurfaceLabel;
use crate::nn::{
    binary_cross_entropy, load_checkpoint, save_checkpoint, softmax_cross_entropy, Layer, LayerSpec, Network,
    Optimizer, OptimizerConfig, Tensor,
};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSpec {
    pub feature_dim: usize,
    pub bottleneck: usize,
    pub classes: usize,
    pub discriminator_hidden: usize,
}

impl Default for HeadSpec {
    fn default() -> Self {
        Self {
            feature_dim: 384,
            bottleneck: 256,
            classes: 4,
            discriminator_hidden: 64,
        }
    }
}

impl HeadSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.feature_dim == 0 || self.bottleneck == 0 || self.discriminator_hidden == 0 {
            v.push("classifier.heads dimensions must be positive".into());
        }
        if self.classes < 2 {
            v.push("classifier.heads.classes must be at least 2".into());
        }
        v
    }
}

/// Bottleneck (affine, layer norm, GELU), class head and domain
/// discriminator behind a gradient reversal layer.
#[derive(Debug, Clone)]
pub struct DannModel {
    spec: HeadSpec,
    seed: u64,
    pub bottleneck: Network,
    pub classifier: Network,
    pub discriminator: Network,
    trained: bool,
}

/// Loss values of one step. `bce` is absent for purely supervised steps.
/// With it, `l_cls = ce - alpha * bce` and `l_dis = alpha * bce`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLosses {
    pub ce: f64,
    pub bce: Option<f64>,
    pub alpha: f64,
}

impl StepLosses {
    pub fn l_cls(&self) -> f64 {
        self.ce - self.alpha * self.bce.unwrap_or(0.0)
    }

    pub fn l_dis(&self) -> f64 {
        self.alpha * self.bce.unwrap_or(0.0)
    }
}

/// Which loss terms send gradients in [`DannModel::accumulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub classification: bool,
    pub domain: bool,
}

impl Terms {
    pub const BOTH: Terms = Terms {
        classification: true,
        domain: true,
    };
}

impl DannModel {
    pub fn new(spec: HeadSpec, seed: u64) -> Result<Self> {
        let v = spec.violations();
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let b = spec.bottleneck;
        let bottleneck = Network::from_specs(
            &[
                LayerSpec::Affine {
                    inputs: spec.feature_dim,
                    outputs: b,
                },
                LayerSpec::LayerNorm { dim: b },
                LayerSpec::Gelu,
            ],
            derive_seed(seed, 0),
        )?;
        let classifier = Network::from_specs(
            &[LayerSpec::Affine {
                inputs: b,
                outputs: spec.classes,
            }],
            derive_seed(seed, 1),
        )?;
        let discriminator = Network::from_specs(
            &[
                LayerSpec::GradientReversal { alpha: 1.0 },
                LayerSpec::Affine {
                    inputs: b,
                    outputs: spec.discriminator_hidden,
                },
                LayerSpec::Gelu,
                LayerSpec::Affine {
                    inputs: spec.discriminator_hidden,
                    outputs: 1,
                },
            ],
            derive_seed(seed, 2),
        )?;
        Ok(Self {
            spec,
            seed,
            bottleneck,
            classifier,
            discriminator,
            trained: false,
        })
    }

    pub fn spec(&self) -> &HeadSpec {
        &self.spec
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }

    fn set_alpha(&mut self, alpha: f64) {
        if let Some(Layer::GradientReversal(g)) = self.discriminator.layers_mut().first_mut() {
            g.alpha = alpha;
        }
    }

    pub fn zero_grad(&mut self) {
        self.bottleneck.zero_grad();
        self.classifier.zero_grad();
        self.discriminator.zero_grad();
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.bottleneck.params_mut();
        p.extend(self.classifier.params_mut());
        p.extend(self.discriminator.params_mut());
        p
    }

    pub fn param_hash(&self) -> String {
        [&self.bottleneck, &self.classifier, &self.discriminator]
            .iter()
            .map(|n| n.param_hash())
            .collect::<Vec<_>>()
            .join("")
    }

    /// Bottleneck features `z = beta(x)` of extracted features.
    pub fn embed(&self, features: &Tensor) -> Result<Tensor> {
        self.bottleneck.forward(features)
    }

    pub fn logits(&self, features: &Tensor) -> Result<Tensor> {
        self.classifier.forward(&self.embed(features)?)
    }

    /// Mean domain BCE of the discriminator on `[sim; real]` (labels 0 then 1).
    pub fn domain_loss(&self, sim: &Tensor, real: &Tensor) -> Result<f64> {
        let all = Tensor::concat_batch(sim, real)?;
        let d = self.discriminator.forward(&self.embed(&all)?)?;
        Ok(binary_cross_entropy(&d, &domain_labels(sim.batch(), real.batch()))?.value)
    }

    /// One forward and backward pass, accumulating gradients into all
    /// trainable parameters. The class loss reaches the bottleneck and the
    /// class head; the domain loss trains the discriminator and reaches the
    /// bottleneck through the reversal layer scaled by `-alpha`.
    pub fn accumulate(
        &mut self,
        sim: &Tensor,
        labels: &[usize],
        real: Option<&Tensor>,
        alpha: f64,
        terms: Terms,
    ) -> Result<StepLosses> {
        if sim.batch() == 0 || real.is_some_and(|r| r.batch() == 0) {
            return Err(Error::InvalidArgument("classifier batches must be nonempty".into()));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        let n = sim.batch();
        let input = match real {
            Some(r) => Tensor::concat_batch(sim, r)?,
            None => sim.clone(),
        };
        let z = self.bottleneck.forward_train(&input)?;
        let z_sim = z.output.slice_batch(0, n)?;
        let cls = self.classifier.forward_train(&z_sim)?;
        let ce = softmax_cross_entropy(&cls.output, labels)?;
        let mut g_z = vec![0.0; z.output.len()];
        if terms.classification {
            let g = self.classifier.backward(&cls, &ce.grad)?;
            g_z[..g.len()].copy_from_slice(g.data());
        }
        let mut bce = None;
        if let Some(r) = real {
            self.set_alpha(alpha);
            let d = self.discriminator.forward_train(&z.output)?;
            let loss = binary_cross_entropy(&d.output, &domain_labels(n, r.batch()))?;
            if terms.domain {
                let g = self.discriminator.backward(&d, &loss.grad)?;
                g_z.iter_mut().zip(g.data()).for_each(|(a, b)| *a += b);
            }
            bce = Some(loss.value);
        }
        let losses = StepLosses { ce: ce.value, bce, alpha };
        if !losses.l_cls().is_finite() {
            return Err(Error::NonFinite("classifier loss".into()));
        }
        self.bottleneck
            .backward(&z, &Tensor::new(z.output.shape().to_vec(), g_z)?)?;
        Ok(losses)
    }

    /// One end-to-end update: zero gradients, [`accumulate`](Self::accumulate)
    /// both terms, then step the bottleneck and class head with `features`
    /// and the discriminator with `discriminator`.
    pub fn dann_step(
        &mut self,
        sim: &Tensor,
        labels: &[usize],
        real: Option<&Tensor>,
        alpha: f64,
        features: &mut Optimizer,
        discriminator: &mut Optimizer,
    ) -> Result<StepLosses> {
        self.zero_grad();
        let losses = self.accumulate(sim, labels, real, alpha, Terms::BOTH)?;
        let mut params = self.bottleneck.params_mut();
        params.extend(self.classifier.params_mut());
        features.step(params)?;
        if real.is_some() {
            discriminator.step(self.discriminator.params_mut())?;
        }
        Ok(losses)
    }

    /// Predicted labels and raw logits.
    pub fn predict(&self, features: &Tensor) -> Result<(Vec<SurfaceLabel>, Tensor)> {
        if !self.trained {
            return Err(Error::InvalidArgument("classifier has not been trained".into()));
        }
        let logits = self.logits(features)?;
        let k = self.spec.classes;
        let labels = logits
            .data()
            .chunks_exact(k)
            .map(|row| {
                SurfaceLabel::from_code(argmax(row) as u8)
                    .ok_or_else(|| Error::InvalidArgument("class index beyond the four surface labels".into()))
            })
            .collect::<Result<_>>()?;
        Ok((labels, logits))
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let mut named = Vec::new();
        for (prefix, net) in self.groups() {
            named.extend(net.named_params().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        let arch = serde_json::json!({
            "kind": "dann_classifier",
            "spec": self.spec,
            "seed": self.seed,
            "trained": self.trained,
            "extra": extra,
        });
        save_checkpoint(path, &named, &arch)
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let ck = load_checkpoint(path)?;
        let arch = &ck.architecture;
        if arch["kind"] != "dann_classifier" {
            return Err(Error::parse(path, "checkpoint is not a classifier"));
        }
        let spec: HeadSpec =
            serde_json::from_value(arch["spec"].clone()).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut model = Self::new(spec, arch["seed"].as_u64().unwrap_or(0))?;
        model.trained = arch["trained"].as_bool().unwrap_or(false);
        let mut groups: [Vec<(String, Tensor)>; 3] = Default::default();
        for (name, t) in ck.tensors {
            let g = match name.split_once('.') {
                Some(("bottleneck", rest)) => (0, rest),
                Some(("classifier", rest)) => (1, rest),
                Some(("discriminator", rest)) => (2, rest),
                _ => return Err(Error::parse(path, format!("unknown tensor {name}"))),
            };
            groups[g.0].push((g.1.to_owned(), t));
        }
        model.bottleneck.load_params(&groups[0])?;
        model.classifier.load_params(&groups[1])?;
        model.discriminator.load_params(&groups[2])?;
        Ok((model, arch["extra"].clone()))
    }

    fn groups(&self) -> [(&'static str, &Network); 3] {
        [
            ("bottleneck", &self.bottleneck),
            ("classifier", &self.classifier),
            ("discriminator", &self.discriminator),
        ]
    }
}

fn domain_labels(sim: usize, real: usize) -> Vec<f64> {
    let mut d = vec![0.0; sim];
    d.resize(sim + real, 1.0);
    d
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// How `alpha` and the learning rates evolve over training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialSchedule {
    Constant,
    /// With progress `p` in `[0, 1)`: `alpha * (2 / (1 + exp(-10 p)) - 1)`
    /// and learning rates scaled by `(1 + 10 p)^-0.75`.
    Progressive,
}

impl AdversarialSchedule {
    /// `(alpha, learning-rate factor)` at `step` of `steps`.
    pub fn at(self, alpha: f64, step: usize, steps: usize) -> (f64, f64) {
        match self {
            AdversarialSchedule::Constant => (alpha, 1.0),
            AdversarialSchedule::Progressive => {
                let p = step as f64 / steps.max(1) as f64;
                (alpha * (2.0 / (1.0 + (-10.0 * p).exp()) - 1.0), (1.0 + 10.0 * p).powf(-0.75))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierTraining {
    pub steps: usize,
    /// Per domain: each step sees this many sim and this many real items.
    pub batch_size: usize,
    /// Bottleneck and class head.
    pub optimizer: OptimizerConfig,
    /// The discriminator uses the same optimizer at this multiple of its
    /// learning rate.
    pub discriminator_lr_scale: f64,
    pub alpha: f64,
    pub schedule: AdversarialSchedule,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self {
            steps: 1500,
            batch_size: 64,
            optimizer: OptimizerConfig::adam(1e-3),
            discriminator_lr_scale: 10.0,
            alpha: 1.2,
            schedule: AdversarialSchedule::Progressive,
        }
    }
}

impl ClassifierTraining {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.batch_size == 0 {
            v.push("classifier.training.batch_size must be positive".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            v.push("classifier.training.alpha must be finite and >= 0".into());
        }
        if !(self.optimizer.lr.is_finite() && self.optimizer.lr > 0.0) {
            v.push("classifier.training.optimizer.lr must be positive".into());
        }
        if !(self.discriminator_lr_scale.is_finite() && self.discriminator_lr_scale > 0.0) {
            v.push("classifier.training.discriminator_lr_scale must be positive".into());
        }
        v
    }
}

fn gather(features: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let items: Vec<&[f64]> = idx.iter().map(|&i| features.item(i)).collect();
    Tensor::stack(&items, &features.shape()[1..])
}

fn draw(n: usize, k: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    if k <= n {
        sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Minibatch training on cached extractor features. With `real`, every step
/// is a domain-adversarial step; without it, plain supervised training.
/// The discriminator has its own optimizer state.
pub fn train_classifier(
    model: &mut DannModel,
    sim: &Tensor,
    labels: &[usize],
    real: Option<&Tensor>,
    config: &ClassifierTraining,
    seed: u64,
) -> Result<Vec<StepLosses>> {
    let v = config.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    if sim.batch() == 0 || sim.batch() != labels.len() || real.is_some_and(|r| r.batch() == 0) {
        return Err(Error::InvalidArgument(
            "classifier training needs labeled sim features and nonempty real features".into(),
        ));
    }
    let mut opt = Optimizer::new(config.optimizer);
    let mut opt_d = Optimizer::new(OptimizerConfig {
        lr: config.optimizer.lr * config.discriminator_lr_scale,
        ..config.optimizer
    });
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let (alpha, factor) = config.schedule.at(config.alpha, step, config.steps);
        opt.config.lr = config.optimizer.lr * factor;
        opt_d.config.lr = config.optimizer.lr * config.discriminator_lr_scale * factor;
        let mut rng = stream(seed, step as u64);
        let idx = draw(sim.batch(), config.batch_size.min(sim.batch()), &mut rng);
        let xb = gather(sim, &idx)?;
        let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let rb = match real {
            Some(r) => Some(gather(r, &draw(r.batch(), idx.len(), &mut rng))?),
            None => None,
        };
        let losses = model
            .dann_step(&xb, &yb, rb.as_ref(), alpha, &mut opt, &mut opt_d)
            .map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("{m} at step {step}")),
                other => other,
            })?;
        log.push(losses);
    }
    model.mark_trained();
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub lr: f64,
    /// Fraction of each domain held out for scoring.
    pub holdout: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 64,
            hidden: 64,
            lr: 1e-3,
            holdout: 0.3,
        }
    }
}

/// Trains a fresh discriminator (affine, GELU, affine) to tell `sim` from
/// `real` features and returns its balanced held-out accuracy, the mean of
/// the per-domain accuracies.
pub fn probe_domain_accuracy(sim: &Tensor, real: &Tensor, config: &ProbeConfig, seed: u64) -> Result<f64> {
    if !(0.0 < config.holdout && config.holdout < 1.0) || config.batch_size == 0 {
        return Err(Error::InvalidArgument("probe needs 0 < holdout < 1 and a positive batch".into()));
    }
    let dim = sim.item_len();
    let split = |t: &Tensor, s: u64| -> Result<(Tensor, Tensor)> {
        let n = t.batch();
        let held = ((n as f64 * config.holdout).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        let perm = sample(&mut crate::rng::seeded(s), n, n).into_vec();
        Ok((gather(t, &perm[held..])?, gather(t, &perm[..held])?))
    };
    let (sim_tr, sim_te) = split(sim, derive_seed(seed, 0))?;
    let (real_tr, real_te) = split(real, derive_seed(seed, 1))?;
    if sim_tr.batch() == 0 || real_tr.batch() == 0 {
        return Err(Error::InvalidArgument("probe needs at least two items per domain".into()));
    }
    let mut net = Network::from_specs(
        &[
            LayerSpec::Affine {
                inputs: dim,
                outputs: config.hidden,
            },
            LayerSpec::Gelu,
            LayerSpec::Affine {
                inputs: config.hidden,
                outputs: 1,
            },
        ],
        derive_seed(seed, 2),
    )?;
    let mut opt = Optimizer::new(OptimizerConfig::adam(config.lr));
    for step in 0..config.steps {
        let mut rng = stream(derive_seed(seed, 3), step as u64);
        let a = gather(&sim_tr, &draw(sim_tr.batch(), config.batch_size, &mut rng))?;
        let b = gather(&real_tr, &draw(real_tr.batch(), config.batch_size, &mut rng))?;
        let x = Tensor::concat_batch(&a, &b)?;
        let acts = net.forward_train(&x)?;
        let loss = binary_cross_entropy(&acts.output, &domain_labels(a.batch(), b.batch()))?;
        net.zero_grad();
        net.backward(&acts, &loss.grad)?;
        opt.step(net.params_mut())?;
    }
    let accuracy = |t: &Tensor, real_side: bool| -> Result<f64> {
        let d = net.forward(t)?;
        let hits = d.data().iter().filter(|z| (**z > 0.0) == real_side).count();
        Ok(hits as f64 / t.batch() as f64)
    };
    Ok(0.5 * (accuracy(&sim_te, false)? + accuracy(&real_te, true)?))
}
