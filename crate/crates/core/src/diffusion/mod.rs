//! Denoising diffusion on tactile images: a fixed linear-beta noising
//! chain, a small learned noise predictor, and partial-noise translation
//! (noise a source image to an intermediate step, then denoise it with a
//! model trained only on target-domain images).

mod denoiser;
mod metrics;
mod process;
mod schedule;

pub use denoiser::{timestep_embedding, Denoiser, DenoiserActivations, DenoiserSpec, EpsPredictor};
pub use metrics::{paired_style_distance, pearson, ChannelStats};
pub use process::{reverse_step, reverse_step_with, train_denoiser, translate, DenoiserTraining, TranslateConfig};
pub use schedule::{forward_jump, forward_jump_with, forward_step, NoiseSchedule, ScheduleConfig};
