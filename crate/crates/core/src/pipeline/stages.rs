use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::config::{PipelineConfig, TrainingSource};
use super::manifest::{
    collect_outputs, input_ref, now, stage_dir, validate_closure, write_manifest, RunManifest, WorkdirLock,
};
use crate::classifier::{
    evaluate, probe_domain_accuracy, train_classifier, DannModel, EvalReport, ExtractorSpec, FeatureExtractor,
    StepLosses,
};
use crate::diffusion::{train_denoiser, translate, ChannelStats, Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, poisson_disk_sample, read_cloud_ply, write_cloud_ply, write_obj};
use crate::labeler::{label_cloud, read_labeled_ply, write_labeled_csv, write_labeled_ply, LabeledCloud, SurfaceLabel};
use crate::rng::derive_seed;
use crate::tactile::{
    generate_corpus_dataset, read_dataset, write_dataset, Dataset, DatasetItem, DatasetSpec, SensorModel, SimObject,
    TactileImage,
};

pub const SAMPLE: &str = "sample";
pub const LABEL: &str = "label";
pub const SIMULATE: &str = "simulate";
pub const TRAIN_DIFFUSION: &str = "train-diffusion";
pub const TRANSLATE: &str = "translate";
pub const TRAIN_CLASSIFIER: &str = "train-classifier";
pub const EVALUATE: &str = "evaluate";

const TRAIN_SIM: &str = "train_sim";
const TRAIN_REAL: &str = "train_real";
const TEST_REAL: &str = "test_real";

mod seeds {
    pub const SAMPLE: u64 = 1;
    pub const LABEL: u64 = 2;
    pub const TRAIN_SIM: u64 = 3;
    pub const TRAIN_REAL: u64 = 4;
    pub const TEST_REAL: u64 = 5;
    pub const PERTURBATION: u64 = 6;
    pub const DENOISER_INIT: u64 = 7;
    pub const DENOISER_TRAIN: u64 = 8;
    pub const TRANSLATE: u64 = 9;
    pub const EXTRACTOR: u64 = 10;
    pub const HEADS: u64 = 11;
    pub const CLASSIFIER_TRAIN: u64 = 12;
    pub const PROBE: u64 = 13;
}

/// Label histogram of one object, indexed by label code.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub object: String,
    pub histogram: [usize; 4],
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslateSummary {
    pub images: usize,
    /// Pooled channel-statistic distance to the real training images.
    pub distance_before: f64,
    pub distance_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSummary {
    pub final_losses: Option<StepLosses>,
    pub probe_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSummary {
    pub object: String,
    pub label: SurfaceLabel,
    pub points: usize,
    pub ply: PathBuf,
    pub csv: PathBuf,
}

pub fn images_of(dataset: &Dataset) -> Vec<TactileImage> {
    dataset.items.iter().map(|i| i.image.clone()).collect()
}

pub fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let body = || -> std::io::Result<()> {
        writeln!(f, "{header}")?;
        for r in rows {
            writeln!(f, "{r}")?;
        }
        f.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// A configured pipeline bound to its working directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    /// Directory that relative paths in the config resolve against.
    pub base: PathBuf,
    pub workdir: PathBuf,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, base: impl Into<PathBuf>) -> Self {
        let base = base.into();
        let workdir = base.join(&config.workdir);
        Self { config, base, workdir }
    }

    fn seed(&self, k: u64) -> u64 {
        derive_seed(self.config.seed, k)
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        stage_dir(&self.workdir, stage)
    }

    /// Validates upstream closures, clears the stage directory, writes the
    /// resolved config, runs `body`, then records every file it wrote.
    fn run<T>(&self, stage: &str, upstream: &[&str], body: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
        let _lock = WorkdirLock::acquire(&self.workdir)?;
        let started = now();
        let mut inputs = Vec::new();
        for up in upstream {
            validate_closure(&self.workdir, up)?;
            inputs.push(input_ref(&self.workdir, up)?);
        }
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let cfg = dir.join("config.json");
        fs::write(&cfg, self.config.to_json()).map_err(|e| Error::io(&cfg, e))?;
        let out = body(&dir)?;
        let manifest = RunManifest {
            stage: stage.into(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            inputs,
            outputs: collect_outputs(&self.workdir, stage)?,
            started,
            finished: now(),
        };
        write_manifest(&self.workdir, &manifest)?;
        Ok(out)
    }

    pub fn sample(&self) -> Result<Vec<(String, usize)>> {
        self.run(SAMPLE, &[], |dir| {
            let mut counts = Vec::new();
            for (i, o) in self.config.objects.iter().enumerate() {
                let mesh = o.mesh.build(&self.base)?;
                let cloud = poisson_disk_sample(&mesh, self.config.sampling.min_distance, derive_seed(self.seed(seeds::SAMPLE), i as u64))?;
                write_obj(&mesh, &dir.join(format!("{}.obj", o.name)))?;
                write_cloud_ply(&cloud, &dir.join(format!("{}.ply", o.name)))?;
                log::info!("{}: {} points", o.name, cloud.len());
                counts.push((o.name.clone(), cloud.len()));
            }
            Ok(counts)
        })
    }

    pub fn label(&self) -> Result<Vec<LabelSummary>> {
        self.run(LABEL, &[SAMPLE], |dir| {
            let mut out = Vec::new();
            for (i, o) in self.config.objects.iter().enumerate() {
                let cloud = read_cloud_ply(&self.stage_dir(SAMPLE).join(format!("{}.ply", o.name)))?;
                let seed = derive_seed(self.seed(seeds::LABEL), i as u64);
                let (labeled, report) = label_cloud(&cloud, &self.config.labeler, seed)?;
                write_labeled_ply(&labeled, &dir.join(format!("{}.ply", o.name)))?;
                write_labeled_csv(&labeled, &dir.join(format!("{}.csv", o.name)))?;
                out.push(LabelSummary {
                    object: o.name.clone(),
                    histogram: labeled.histogram(),
                    fallbacks: report.fallbacks.len(),
                });
            }
            Ok(out)
        })
    }

    fn load_corpus(&self) -> Result<Vec<(String, crate::geometry::TriangleMesh, LabeledCloud)>> {
        self.config
            .objects
            .iter()
            .map(|o| {
                let mesh = load_mesh(&self.stage_dir(SAMPLE).join(format!("{}.obj", o.name)))?;
                let labeled = read_labeled_ply(&self.stage_dir(LABEL).join(format!("{}.ply", o.name)))?;
                Ok((o.name.clone(), mesh, labeled))
            })
            .collect()
    }

    /// The simulated sensor and its perturbed-optics counterpart.
    pub fn sensors(&self) -> Result<(SensorModel, SensorModel)> {
        let sim = self.config.simulation.sensor.clone();
        let real = self.config.simulation.perturbation.apply(&sim, self.seed(seeds::PERTURBATION))?;
        Ok((sim, real))
    }

    /// Renders the labeled sim training set and the two perturbed-optics
    /// sets. Labels of `train_real` are written but never read downstream.
    pub fn simulate(&self) -> Result<[usize; 3]> {
        self.run(SIMULATE, &[SAMPLE, LABEL], |dir| {
            let corpus = self.load_corpus()?;
            let objects: Vec<SimObject> = corpus
                .iter()
                .map(|(name, mesh, labeled)| SimObject { name, mesh, labeled })
                .collect();
            let (sim, real) = self.sensors()?;
            let sizes = &self.config.simulation.sizes;
            let sets = [
                (TRAIN_SIM, &sim, sizes.train_sim, seeds::TRAIN_SIM),
                (TRAIN_REAL, &real, sizes.train_real, seeds::TRAIN_REAL),
                (TEST_REAL, &real, sizes.test_real, seeds::TEST_REAL),
            ];
            let mut counts = [0; 3];
            for (k, (name, sensor, n, seed)) in sets.into_iter().enumerate() {
                let spec = DatasetSpec {
                    per_class_quota: Some(n / 4),
                    ..self.config.simulation.poses.clone()
                };
                let d = generate_corpus_dataset(&objects, sensor, &spec, self.seed(seed))?;
                write_dataset(&d, &dir.join(name))?;
                counts[k] = d.len();
            }
            let sensors = serde_json::json!({ "sim": sim, "real": real });
            let p = dir.join("sensors.json");
            fs::write(&p, serde_json::to_string_pretty(&sensors).expect("sensors serialize"))
                .map_err(|e| Error::io(&p, e))?;
            Ok(counts)
        })
    }

    pub fn dataset(&self, name: &str) -> Result<Dataset> {
        read_dataset(&self.stage_dir(SIMULATE).join(name))
    }

    fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(&self.config.diffusion.schedule)
    }

    pub fn train_diffusion(&self) -> Result<Vec<f64>> {
        self.run(TRAIN_DIFFUSION, &[SIMULATE], |dir| {
            let d = &self.config.diffusion;
            let images = images_of(&self.dataset(TRAIN_REAL)?);
            let mut net = Denoiser::new(d.denoiser.clone(), self.seed(seeds::DENOISER_INIT))?;
            let curve = train_denoiser(&images, &self.schedule()?, &mut net, &d.training, self.seed(seeds::DENOISER_TRAIN))?;
            net.save(
                &dir.join("denoiser.ckpt"),
                serde_json::json!({ "schedule": d.schedule, "data_scale": d.training.data_scale }),
            )?;
            write_lines(
                &dir.join("loss.csv"),
                "step,loss",
                curve.iter().enumerate().map(|(i, l)| format!("{i},{l}")),
            )?;
            Ok(curve)
        })
    }

    pub fn translate(&self) -> Result<TranslateSummary> {
        self.run(TRANSLATE, &[SIMULATE, TRAIN_DIFFUSION], |dir| {
            let source = self.dataset(TRAIN_SIM)?;
            let (net, _) = Denoiser::load(&self.stage_dir(TRAIN_DIFFUSION).join("denoiser.ckpt"))?;
            let images = images_of(&source);
            let out = translate(
                &images,
                &net,
                &self.schedule()?,
                &self.config.diffusion.translate,
                self.seed(seeds::TRANSLATE),
            )?;
            let real = images_of(&self.dataset(TRAIN_REAL)?);
            let target = ChannelStats::of(&real.iter().collect::<Vec<_>>());
            let before = ChannelStats::of(&images.iter().collect::<Vec<_>>()).distance(&target);
            let after = ChannelStats::of(&out.iter().collect::<Vec<_>>()).distance(&target);
            let translated = Dataset {
                items: source
                    .items
                    .into_iter()
                    .zip(out)
                    .map(|(item, image)| DatasetItem { image, ..item })
                    .collect(),
            };
            write_dataset(&translated, &dir.join("dataset"))?;
            Ok(TranslateSummary {
                images: translated.len(),
                distance_before: before,
                distance_after: after,
            })
        })
    }

    fn extractor(&self) -> Result<FeatureExtractor> {
        FeatureExtractor::new(self.config.classifier.extractor.clone(), self.seed(seeds::EXTRACTOR))
    }

    fn training_set(&self) -> Result<Dataset> {
        match self.config.classifier.source {
            TrainingSource::Translated => read_dataset(&self.stage_dir(TRANSLATE).join("dataset")),
            TrainingSource::Sim => self.dataset(TRAIN_SIM),
        }
    }

    pub fn train_classifier(&self) -> Result<ClassifierSummary> {
        let upstream: &[&str] = match self.config.classifier.source {
            TrainingSource::Translated => &[SIMULATE, TRANSLATE],
            TrainingSource::Sim => &[SIMULATE],
        };
        self.run(TRAIN_CLASSIFIER, upstream, |dir| {
            let c = &self.config.classifier;
            let phi = self.extractor()?;
            let train = self.training_set()?;
            let labels: Vec<usize> = train.items.iter().map(|i| i.label.code() as usize).collect();
            let feats = phi.extract(&images_of(&train))?;
            let real = phi.extract(&images_of(&self.dataset(TRAIN_REAL)?))?;
            let mut model = DannModel::new(c.heads.clone(), self.seed(seeds::HEADS))?;
            let log = train_classifier(
                &mut model,
                &feats,
                &labels,
                c.dann.then_some(&real),
                &c.training,
                self.seed(seeds::CLASSIFIER_TRAIN),
            )?;
            model.save(
                &dir.join("classifier.ckpt"),
                serde_json::json!({ "extractor": c.extractor, "extractor_seed": phi.seed() }),
            )?;
            write_lines(
                &dir.join("loss.csv"),
                "step,ce,bce,l_cls,l_dis",
                log.iter().enumerate().map(|(i, l)| {
                    let bce = l.bce.map(|b| b.to_string()).unwrap_or_default();
                    format!("{i},{},{bce},{},{}", l.ce, l.l_cls(), l.l_dis())
                }),
            )?;
            let probe_accuracy = match &c.probe {
                Some(p) => {
                    let acc = probe_domain_accuracy(&model.embed(&feats)?, &model.embed(&real)?, p, self.seed(seeds::PROBE))?;
                    let path = dir.join("probe.json");
                    fs::write(&path, serde_json::json!({ "balanced_accuracy": acc }).to_string())
                        .map_err(|e| Error::io(&path, e))?;
                    Some(acc)
                }
                None => None,
            };
            Ok(ClassifierSummary {
                final_losses: log.last().copied(),
                probe_accuracy,
            })
        })
    }

    pub fn evaluate(&self) -> Result<EvalReport> {
        self.run(EVALUATE, &[SIMULATE, TRAIN_CLASSIFIER], |dir| {
            let (model, extra) = DannModel::load(&self.stage_dir(TRAIN_CLASSIFIER).join("classifier.ckpt"))?;
            let spec: ExtractorSpec = serde_json::from_value(extra["extractor"].clone())
                .map_err(|e| Error::InvalidArgument(format!("classifier checkpoint lacks its extractor: {e}")))?;
            let seed = extra["extractor_seed"]
                .as_u64()
                .ok_or_else(|| Error::InvalidArgument("classifier checkpoint lacks its extractor seed".into()))?;
            let phi = FeatureExtractor::new(spec, seed)?;
            let test = self.dataset(TEST_REAL)?;
            let (pred, _) = model.predict(&phi.extract(&images_of(&test))?)?;
            let pred: Vec<usize> = pred.iter().map(|l| l.code() as usize).collect();
            let truth: Vec<usize> = test.items.iter().map(|i| i.label.code() as usize).collect();
            let groups: Vec<String> = test.items.iter().map(|i| i.object.clone()).collect();
            let expected: Vec<String> = self.config.objects.iter().map(|o| o.name.clone()).collect();
            let report = evaluate(&pred, &truth, &groups, &expected)?;
            report.write_json(&dir.join("report.json"))?;
            report.write_csv(&dir.join("report.csv"))?;
            Ok(report)
        })
    }

    /// Exports every sampled point of `object` whose label equals `label`:
    /// the contact hypotheses for a classifier prediction.
    pub fn hypothesize(&self, object: &str, label: SurfaceLabel) -> Result<HypothesisSummary> {
        if !self.config.objects.iter().any(|o| o.name == object) {
            return Err(Error::Config(vec![format!("object {object:?} is not in the config")]));
        }
        let stage = format!("hypothesize-{object}-{}", label.name());
        self.run(&stage, &[LABEL], |dir| {
            let labeled = read_labeled_ply(&self.stage_dir(LABEL).join(format!("{object}.ply")))?;
            let idx = labeled.indices_with(label);
            if idx.is_empty() {
                log::warn!("{object} has no {} points; the hypothesis set is empty", label.name());
            }
            let ply = dir.join("points.ply");
            let csv = dir.join("points.csv");
            write_lines(
                &ply,
                &format!(
                    "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double nx\nproperty double ny\nproperty double nz\nproperty uint index\nproperty uchar label\nend_header",
                    idx.len()
                ),
                idx.iter().map(|&i| {
                    let s = &labeled.cloud.samples()[i];
                    let (p, n) = (s.position, s.normal);
                    format!("{} {} {} {} {} {} {i} {}", p.x, p.y, p.z, n.x, n.y, n.z, label.code())
                }),
            )?;
            write_lines(
                &csv,
                "index,x,y,z,label",
                idx.iter().map(|&i| {
                    let p = labeled.cloud.samples()[i].position;
                    format!("{i},{},{},{},{}", p.x, p.y, p.z, label.name())
                }),
            )?;
            Ok(HypothesisSummary {
                object: object.into(),
                label,
                points: idx.len(),
                ply,
                csv,
            })
        })
    }
}
