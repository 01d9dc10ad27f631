//! Audio-visual crowded-scene classification pipeline.
//!
//! The crate implements the full desk-scale pipeline: dataset manifests with
//! video-level split discipline, MEL/CQT/Gammatone spectrogram frontends,
//! SpecAugment + mixup data augmentation, a from-scratch VGG15 classifier
//! trained with a KL-divergence objective and Adam, per-segment probability
//! aggregation, MEAN/PROD/MAX late fusion, accuracy/confusion evaluation, and
//! a deterministic synthetic corpus generator for end-to-end testing.
//!
//! Tensors exchanged between pipeline stages (features, checkpoints) use the
//! CSTF binary container in [`cstf`].

pub mod audio;
pub mod augment;
pub mod cstf;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod manifest;
pub mod nn;
pub mod synth;

pub use augment::{AugmentConfig, SoftLabel};
pub use cstf::CstfError;
pub use dsp::{DspConfig, FeatureKind, Patch, PcmBuffer, SpecKind, Spectrogram};
pub use eval::EvalReport;
pub use fusion::{FusionInput, FusionScheme, SegmentPrediction};
pub use manifest::{DatasetManifest, SceneLabel, SegmentRecord, Split};
pub use nn::{ProbVector, TrainConfig, Vgg15Params};
pub use synth::SynthSpec;

/// Number of scene classes. Drives label codes, probability-vector length and
/// the softmax dimension.
pub const CLASS_COUNT: usize = 5;
