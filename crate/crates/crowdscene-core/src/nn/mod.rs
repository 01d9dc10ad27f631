//! The VGG15 classifier: architecture, forward/backward passes,
//! KL-divergence objective, Adam, the training loop, and checkpoint I/O.

pub mod adam;
pub mod arch;
pub mod checkpoint;
mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use arch::{vgg15, vgg15_with_dropout, NetSpec, PoolKind, Vgg15Params};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use network::{
    backward, batch_from_patches, forward_infer, forward_infer_traced, forward_train, gradients,
    kl_loss, probs_to_vectors, recalibrate_running_stats, update_running_stats,
};
pub use tensor::{Scalar, Tensor};
pub use train::{train, FeatureStore, NormStats, TrainConfig, TrainError, TrainHistory};

use crate::manifest::SceneLabel;
use crate::CLASS_COUNT;

/// A probability distribution over the five classes as produced by the
/// softmax head, or a raw fused score vector (PROD/MAX fusion outputs are
/// not renormalized; [`ProbVector::is_distribution`] tells them apart).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbVector([f64; CLASS_COUNT]);

impl ProbVector {
    pub fn new(values: [f64; CLASS_COUNT]) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "probabilities must be finite and non-negative, got {values:?}"
        );
        Self(values)
    }

    pub fn uniform() -> Self {
        Self([1.0 / CLASS_COUNT as f64; CLASS_COUNT])
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }

    pub fn get(&self, label: SceneLabel) -> f64 {
        self.0[label.code()]
    }

    /// True when the entries sum to one within `tol`.
    pub fn is_distribution(&self, tol: f64) -> bool {
        (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Index of the maximum entry; ties resolve to the lowest class code.
    pub fn argmax(&self) -> SceneLabel {
        let idx = self
            .0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| if v > self.0[acc] { i } else { acc });
        SceneLabel::from_code(idx).expect("index in range")
    }
}
