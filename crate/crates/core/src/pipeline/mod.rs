//! Stage orchestration over one JSON config and one working directory.
//!
//! Each stage writes into `<workdir>/<stage>/`, including a copy of the
//! resolved config and a manifest that hashes every file it produced and
//! every upstream manifest it consumed.

mod config;
mod manifest;
mod stages;

pub use config::{
    ClassifierConfig, DatasetSizes, DiffusionConfig, MeshSource, ObjectConfig, PipelineConfig, SamplingConfig,
    SimulationConfig, TrainingSource,
};
pub use manifest::{
    collect_outputs, read_manifest, sha256_file, validate_closure, Artifact, InputRef, RunManifest, WorkdirLock,
    MANIFEST_NAME,
};
pub use stages::{
    images_of, ClassifierSummary, HypothesisSummary, LabelSummary, Pipeline, TranslateSummary, EVALUATE, LABEL,
    SAMPLE, SIMULATE, TRAIN_CLASSIFIER, TRAIN_DIFFUSION, TRANSLATE,
};
