//! Surface classifier with domain-adversarial feature alignment: a frozen
//! feature extractor, a trainable bottleneck and class head, and a domain
//! discriminator trained through a gradient reversal layer.

mod features;
mod metrics;
mod model;

pub use features::{ExtractorSpec, FeatureExtractor};
pub use metrics::{evaluate, ClassMetrics, EvalReport, GroupAccuracy};
pub use model::{
    argmax, probe_domain_accuracy, AdversarialSchedule, train_classifier, ClassifierTraining, DannModel, HeadSpec, ProbeConfig,
    StepLosses, Terms,
};
