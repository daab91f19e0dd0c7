use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifier::{ClassifierTraining, ExtractorSpec, HeadSpec, ProbeConfig};
use crate::diffusion::{DenoiserSpec, DenoiserTraining, ScheduleConfig, TranslateConfig};
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, shapes, TriangleMesh};
use crate::labeler::LabelerConfig;
use crate::nn::OptimizerConfig;
use crate::tactile::{DatasetSpec, DomainPerturbation, SensorModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// OBJ or PLY file; relative paths resolve against the config file.
    File { path: PathBuf },
    Cube { side: f64 },
    Sphere { radius: f64, subdivisions: u32 },
    Cylinder { radius: f64, height: f64, segments: usize },
}

impl MeshSource {
    pub fn build(&self, base: &Path) -> Result<TriangleMesh> {
        Ok(match self {
            MeshSource::File { path } => load_mesh(&base.join(path))?,
            MeshSource::Cube { side } => shapes::cube(*side),
            MeshSource::Sphere { radius, subdivisions } => shapes::icosphere(*radius, *subdivisions),
            MeshSource::Cylinder {
                radius,
                height,
                segments,
            } => shapes::cylinder(*radius, *height, *segments),
        })
    }

    fn violations(&self, name: &str) -> Vec<String> {
        let positive = |what: &str, x: f64| (!(x.is_finite() && x > 0.0)).then(|| format!("objects.{name}.{what} must be positive"));
        match self {
            MeshSource::File { .. } => vec![],
            MeshSource::Cube { side } => positive("side", *side).into_iter().collect(),
            MeshSource::Sphere { radius, subdivisions } => {
                let mut v: Vec<String> = positive("radius", *radius).into_iter().collect();
                if *subdivisions > 7 {
                    v.push(format!("objects.{name}.subdivisions must be at most 7"));
                }
                v
            }
            MeshSource::Cylinder {
                radius,
                height,
                segments,
            } => {
                let mut v: Vec<String> = [positive("radius", *radius), positive("height", *height)]
                    .into_iter()
                    .flatten()
                    .collect();
                if *segments < 3 {
                    v.push(format!("objects.{name}.segments must be at least 3"));
                }
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub name: String,
    pub mesh: MeshSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub min_distance: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { min_distance: 0.002 }
    }
}

/// Image counts of the three datasets. Each is split evenly over the four
/// surface labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSizes {
    pub train_real: usize,
    pub train_sim: usize,
    pub test_real: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            train_real: 500,
            train_sim: 5000,
            test_real: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub sensor: SensorModel,
    pub perturbation: DomainPerturbation,
    pub poses: DatasetSpec,
    pub sizes: DatasetSizes,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            sensor: SensorModel {
                resolution: (16, 16),
                gel_sigma_px: 0.5,
                ..SensorModel::default()
            },
            perturbation: DomainPerturbation::default(),
            poses: DatasetSpec::default(),
            sizes: DatasetSizes::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserSpec,
    pub training: DenoiserTraining,
    pub translate: TranslateConfig,
}

/// Which images the classifier is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSource {
    Translated,
    Sim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub source: TrainingSource,
    /// Align features with the unlabeled real training images.
    pub dann: bool,
    pub extractor: ExtractorSpec,
    pub heads: HeadSpec,
    pub training: ClassifierTraining,
    /// Fit a fresh domain probe on the trained bottleneck features.
    pub probe: Option<ProbeConfig>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            source: TrainingSource::Translated,
            dann: true,
            extractor: ExtractorSpec::default(),
            heads: HeadSpec::default(),
            training: ClassifierTraining::default(),
            probe: Some(ProbeConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Relative paths resolve against the config file.
    pub workdir: PathBuf,
    pub seed: u64,
    pub objects: Vec<ObjectConfig>,
    pub sampling: SamplingConfig,
    pub labeler: LabelerConfig,
    pub simulation: SimulationConfig,
    pub diffusion: DiffusionConfig,
    pub classifier: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let object = |name: &str, mesh| ObjectConfig {
            name: name.into(),
            mesh,
        };
        Self {
            workdir: "run".into(),
            seed: 0,
            objects: vec![
                object("cube", MeshSource::Cube { side: 0.04 }),
                object(
                    "sphere",
                    MeshSource::Sphere {
                        radius: 0.02,
                        subdivisions: 5,
                    },
                ),
                object(
                    "cylinder",
                    MeshSource::Cylinder {
                        radius: 0.015,
                        height: 0.04,
                        segments: 128,
                    },
                ),
            ],
            sampling: SamplingConfig::default(),
            labeler: LabelerConfig::default(),
            simulation: SimulationConfig::default(),
            diffusion: DiffusionConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

fn optimizer_violations(prefix: &str, o: &OptimizerConfig) -> Vec<String> {
    if o.lr.is_finite() && o.lr > 0.0 {
        vec![]
    } else {
        vec![format!("{prefix}.lr must be positive")]
    }
}

impl PipelineConfig {
    /// Every violated constraint across all sections.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.objects.is_empty() {
            v.push("objects must list at least one object".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            let ok = !o.name.is_empty()
                && o.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                v.push(format!("objects: name {:?} must be nonempty [A-Za-z0-9_-]", o.name));
            }
            if !seen.insert(&o.name) {
                v.push(format!("objects: duplicate name {:?}", o.name));
            }
            v.extend(o.mesh.violations(&o.name));
        }
        if !(self.sampling.min_distance.is_finite() && self.sampling.min_distance > 0.0) {
            v.push("sampling.min_distance must be positive".into());
        }
        v.extend(self.labeler.violations());
        let sim = &self.simulation;
        v.extend(sim.sensor.violations());
        v.extend(sim.perturbation.violations());
        v.extend(sim.poses.violations(&sim.sensor));
        if sim.poses.per_class_quota.is_some() {
            v.push("simulation.poses.per_class_quota is set from simulation.sizes; leave it null".into());
        }
        for (name, n) in [
            ("train_real", sim.sizes.train_real),
            ("train_sim", sim.sizes.train_sim),
            ("test_real", sim.sizes.test_real),
        ] {
            if n == 0 || n % 4 != 0 {
                v.push(format!("simulation.sizes.{name} must be a positive multiple of 4, got {n}"));
            }
        }
        let d = &self.diffusion;
        v.extend(d.schedule.violations());
        v.extend(d.denoiser.violations());
        if d.denoiser.channels != 3 {
            v.push("diffusion.denoiser.channels must be 3 for tactile images".into());
        }
        if d.denoiser.down_path && (!sim.sensor.width().is_multiple_of(2) || !sim.sensor.height().is_multiple_of(2)) {
            v.push("diffusion.denoiser.down_path needs an even sensor resolution".into());
        }
        if d.training.batch_size == 0 {
            v.push("diffusion.training.batch_size must be positive".into());
        }
        if !(d.training.data_scale.is_finite() && d.training.data_scale > 0.0) {
            v.push("diffusion.training.data_scale must be positive".into());
        }
        v.extend(optimizer_violations("diffusion.training.optimizer", &d.training.optimizer));
        if d.translate.t_prime >= d.schedule.timesteps {
            v.push(format!(
                "diffusion.translate.t_prime must be below diffusion.schedule.timesteps ({})",
                d.schedule.timesteps
            ));
        }
        if d.translate.data_scale != d.training.data_scale {
            v.push("diffusion.translate.data_scale must equal diffusion.training.data_scale".into());
        }
        let c = &self.classifier;
        v.extend(c.extractor.violations());
        v.extend(c.heads.violations());
        v.extend(c.training.violations());
        if c.extractor.channels != 3 {
            v.push("classifier.extractor.channels must be 3 for tactile images".into());
        }
        if c.heads.feature_dim != c.extractor.dim {
            v.push("classifier.heads.feature_dim must equal classifier.extractor.dim".into());
        }
        if c.heads.classes != 4 {
            v.push("classifier.heads.classes must be 4".into());
        }
        if let Some(p) = &c.probe {
            if !(0.0 < p.holdout && p.holdout < 1.0) || p.batch_size == 0 || p.hidden == 0 {
                v.push("classifier.probe needs 0 < holdout < 1 and positive batch_size and hidden".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses, applies `key.path=value` overrides to scalar fields, and
    /// validates. Unknown keys anywhere are rejected.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let parsed: PipelineConfig = serde_json::from_value(raw).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let mut value = serde_json::to_value(&parsed).expect("config serializes");
        let mut errors = Vec::new();
        for o in overrides {
            if let Err(e) = apply_override(&mut value, o) {
                errors.push(e);
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let config: PipelineConfig = serde_json::from_value(value).map_err(|e| Error::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file and resolves `workdir` against its directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let config = Self::from_json(&text, overrides)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }
}

fn apply_override(root: &mut Value, spec: &str) -> std::result::Result<(), String> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override {spec:?} is not key=value"))?;
    let mut node = &mut *root;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| format!("override key {key:?} does not exist"))?;
    }
    if node.is_object() || node.is_array() {
        return Err(format!("override key {key:?} is not a scalar field"));
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back = PipelineConfig::from_json(&c.to_json(), &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_json(r#"{"sampling": {"min_distance": 0.01, "bogus": 1}}"#, &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(PipelineConfig::from_json(r#"{"extra": 1}"#, &[]).is_err());
    }

    #[test]
    fn violations_are_listed_exhaustively() {
        let text = r#"{
            "sampling": {"min_distance": -1},
            "simulation": {"sizes": {"train_real": 7, "train_sim": 0, "test_real": 8}},
            "diffusion": {"translate": {"t_prime": 500}, "training": {"data_scale": 5.0}}
        }"#;
        let Err(Error::Config(v)) = PipelineConfig::from_json(text, &[]) else {
            panic!("expected a config error")
        };
        assert!(v.iter().any(|m| m.contains("min_distance")));
        assert!(v.iter().any(|m| m.contains("train_real")));
        assert!(v.iter().any(|m| m.contains("train_sim")));
        assert!(v.iter().any(|m| m.contains("t_prime")));
        assert!(v.iter().any(|m| m.contains("data_scale")));
    }

    #[test]
    fn overrides_touch_scalars_only() {
        let c = PipelineConfig::from_json("{}", &["seed=7".into(), "classifier.dann=false".into()]).unwrap();
        assert_eq!(c.seed, 7);
        assert!(!c.classifier.dann);
        let c = PipelineConfig::from_json("{}", &["classifier.source=sim".into()]).unwrap();
        assert_eq!(c.classifier.source, TrainingSource::Sim);
        let c = PipelineConfig::from_json("{}", &["objects.0.mesh.side=0.05".into()]).unwrap();
        assert_eq!(c.objects[0].mesh, MeshSource::Cube { side: 0.05 });
        assert!(PipelineConfig::from_json("{}", &["sampling=1".into()]).is_err());
        assert!(PipelineConfig::from_json("{}", &["nope.x=1".into()]).is_err());
        assert!(PipelineConfig::from_json("{}", &["seed".into()]).is_err());
    }
}
