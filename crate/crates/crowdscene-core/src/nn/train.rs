//! The training loop: feature loading, train-split standardization,
//! augmented mini-batches, Adam updates, and best-by-train-loss checkpoint
//! selection. Also the shared on-disk feature store and the inference path
//! from stored features to per-segment predictions.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::arch::{vgg15_with_dropout, Vgg15Params, VGG15_CONV_DROPOUT, VGG15_FC_DROPOUT};
use super::checkpoint::{save_checkpoint, CheckpointError};
use super::network::{
    backward, batch_from_patches, forward_infer, forward_train, kl_data_loss, probs_to_vectors,
    recalibrate_running_stats, update_running_stats,
};
use super::tensor::Tensor;
use crate::augment::{augment_batch, AugmentConfig, SoftLabel};
use crate::cstf::{self, CstfError, CstfTensor};
use crate::dsp::{FeatureKind, Patch, PatchSource, Spectrogram, PATCH_SIDE};
use crate::fusion::{aggregate_segment, SegmentPrediction};
use crate::manifest::{DatasetManifest, SegmentRecord, Split};
use crate::CLASS_COUNT;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no records in the requested split")]
    NoRecords,
    #[error("missing features for segment {segment_id:?}")]
    MissingFeatures { segment_id: String },
    #[error("feature file for {segment_id:?} has dims {dims:?}, expected {expected}")]
    BadFeatureShape {
        segment_id: String,
        dims: Vec<usize>,
        expected: String,
    },
    #[error("non-finite loss at epoch {epoch}, step {step} (loss {loss})")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("feature store: {0}")]
    Cstf(#[from] CstfError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
}

/// Directory of one CSTF file per segment, named after the segment id.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    dir: PathBuf,
}

impl FeatureStore {
    pub fn new<P: AsRef<Path>>(dir: P) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, segment_id: &str) -> PathBuf {
        let safe: String = segment_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.dir.join(format!("{safe}.cstf"))
    }

    pub fn has(&self, segment_id: &str) -> bool {
        self.path_for(segment_id).exists()
    }

    pub fn save(&self, segment_id: &str, tensor: &CstfTensor) -> Result<(), CstfError> {
        std::fs::create_dir_all(&self.dir)?;
        cstf::write_file(self.path_for(segment_id), tensor)
    }

    pub fn load(&self, segment_id: &str) -> Result<CstfTensor, CstfError> {
        cstf::read_file(self.path_for(segment_id))
    }
}

/// Standardization statistics fit on the train split. For spectrogram
/// features the axis is the frequency bin; for frame features the color
/// channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    /// Fits mean/std per feature axis over all supplied tensors.
    pub fn fit(kind: FeatureKind, features: &[CstfTensor]) -> Self {
        let width = match kind {
            FeatureKind::Frames => 3,
            _ => PATCH_SIDE,
        };
        let mut sum = vec![0.0f64; width];
        let mut sq = vec![0.0f64; width];
        let mut count = vec![0u64; width];
        for t in features {
            accumulate_axis(kind, t, &mut sum, &mut sq, &mut count);
        }
        let mut mean = vec![0.0f32; width];
        let mut std = vec![1.0f32; width];
        for i in 0..width {
            if count[i] == 0 {
                continue;
            }
            let n = count[i] as f64;
            let m = sum[i] / n;
            let var = (sq[i] / n - m * m).max(0.0);
            mean[i] = m as f32;
            std[i] = (var.sqrt() as f32).max(1e-6);
        }
        Self { mean, std }
    }

    /// Applies `(x - mean) / std` along the feature axis in place.
    pub fn standardize(&self, kind: FeatureKind, tensor: &mut CstfTensor) {
        match kind {
            FeatureKind::Frames => {
                // [N, 3, H, W]
                let plane: usize = tensor.dims[2] * tensor.dims[3];
                for frame in tensor.data.chunks_mut(3 * plane) {
                    for (c, ch) in frame.chunks_mut(plane).enumerate() {
                        let (m, s) = (self.mean[c], self.std[c]);
                        for v in ch {
                            *v = (*v - m) / s;
                        }
                    }
                }
            }
            _ => {
                // [frames, bins]
                let bins = tensor.dims[1];
                for row in tensor.data.chunks_mut(bins) {
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = (*v - self.mean[b]) / self.std[b];
                    }
                }
            }
        }
    }
}

fn accumulate_axis(
    kind: FeatureKind,
    t: &CstfTensor,
    sum: &mut [f64],
    sq: &mut [f64],
    count: &mut [u64],
) {
    match kind {
        FeatureKind::Frames => {
            let plane: usize = t.dims[2] * t.dims[3];
            for frame in t.data.chunks(3 * plane) {
                for (c, ch) in frame.chunks(plane).enumerate() {
                    for &v in ch {
                        sum[c] += f64::from(v);
                        sq[c] += f64::from(v) * f64::from(v);
                    }
                    count[c] += plane as u64;
                }
            }
        }
        _ => {
            let bins = t.dims[1];
            for row in t.data.chunks(bins) {
                for (b, &v) in row.iter().enumerate() {
                    sum[b] += f64::from(v);
                    sq[b] += f64::from(v) * f64::from(v);
                }
            }
            for c in count.iter_mut().take(bins) {
                *c += (t.data.len() / bins) as u64;
            }
        }
    }
}

/// Checks a feature tensor's dims against the kind and cuts it into patches.
pub fn patches_from_feature(
    tensor: &CstfTensor,
    kind: FeatureKind,
    segment_id: &str,
) -> Result<Vec<Patch>, TrainError> {
    match kind {
        FeatureKind::Frames => {
            if tensor.dims.len() != 4
                || tensor.dims[1] != 3
                || tensor.dims[2] != PATCH_SIDE
                || tensor.dims[3] != PATCH_SIDE
            {
                return Err(TrainError::BadFeatureShape {
                    segment_id: segment_id.to_string(),
                    dims: tensor.dims.clone(),
                    expected: "[frames, 3, 128, 128]".into(),
                });
            }
            let frame_len = 3 * PATCH_SIDE * PATCH_SIDE;
            Ok(tensor
                .data
                .chunks(frame_len)
                .enumerate()
                .map(|(i, chunk)| {
                    Patch::new(
                        chunk.to_vec(),
                        3,
                        PatchSource {
                            segment_id: segment_id.to_string(),
                            patch_index: i,
                        },
                    )
                })
                .collect())
        }
        _ => {
            if tensor.dims.len() != 2 || tensor.dims[1] != PATCH_SIDE {
                return Err(TrainError::BadFeatureShape {
                    segment_id: segment_id.to_string(),
                    dims: tensor.dims.clone(),
                    expected: "[frames, 128]".into(),
                });
            }
            let spec = Spectrogram {
                kind: kind.spec_kind().expect("spectrogram kind"),
                values: tensor.data.clone(),
                frames: tensor.dims[0],
                bins: tensor.dims[1],
                hop_samples: 0,
                sample_rate: 0,
            };
            crate::dsp::patchify(&spec, segment_id).map_err(|_| TrainError::BadFeatureShape {
                segment_id: segment_id.to_string(),
                dims: tensor.dims.clone(),
                expected: "[frames, 128]".into(),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub l2_lambda: f64,
    pub seed: u64,
    pub conv_dropout: [f32; 12],
    pub fc_dropout: [f32; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            l2_lambda: 1e-4,
            seed: 0,
            conv_dropout: VGG15_CONV_DROPOUT,
            fc_dropout: VGG15_FC_DROPOUT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 2".into()));
        }
        if self.adam.lr <= 0.0 {
            return Err(TrainError::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.l2_lambda < 0.0 {
            return Err(TrainError::InvalidConfig("l2_lambda must be >= 0".into()));
        }
        let rates = self.conv_dropout.iter().chain(self.fc_dropout.iter());
        for &r in rates {
            if !(0.0..1.0).contains(&r) {
                return Err(TrainError::InvalidConfig(format!(
                    "dropout rate {r} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Summed KL loss over the epoch's augmented samples plus the L2 term.
    pub loss: f64,
    pub mean_patch_loss: f64,
    /// Batch-level accuracy of argmax(output) against argmax(soft target).
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

pub struct TrainOutcome {
    pub params: Vgg15Params<f32>,
    pub history: TrainHistory,
    pub norm: NormStats,
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Trains a VGG15 on the train split of `manifest` using features from
/// `store`. When `checkpoint_out` is set, the best-by-train-loss parameters
/// are persisted there together with the standardization statistics.
pub fn train(
    manifest: &DatasetManifest,
    store: &FeatureStore,
    kind: FeatureKind,
    cfg: &TrainConfig,
    aug_cfg: &AugmentConfig,
    checkpoint_out: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    aug_cfg
        .validate()
        .map_err(TrainError::InvalidConfig)?;

    let records: Vec<&SegmentRecord> = manifest.split_records(Split::Train).collect();
    if records.is_empty() {
        return Err(TrainError::NoRecords);
    }

    // Load features, fit normalization on the train split, standardize, cut
    // into patches.
    let mut features = Vec::with_capacity(records.len());
    for r in &records {
        let id = r.segment_id();
        if !store.has(&id) {
            return Err(TrainError::MissingFeatures { segment_id: id });
        }
        features.push(store.load(&id)?);
    }
    let norm = NormStats::fit(kind, &features);
    let mut patches = Vec::new();
    let mut labels = Vec::new();
    for (tensor, record) in features.iter_mut().zip(&records) {
        norm.standardize(kind, tensor);
        let segment_patches = patches_from_feature(tensor, kind, &record.segment_id())?;
        for p in segment_patches {
            patches.push(p);
            labels.push(SoftLabel::one_hot(record.label.code()));
        }
    }

    let mut params = Vgg15Params::<f32>::build(
        vgg15_with_dropout(kind.channels(), &cfg.conv_dropout, &cfg.fc_dropout),
        cfg.seed,
    );
    let mut adam = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    // The augmentation stream is owned by the augment config's seed so the
    // same corpus ordering can be replayed under different mask draws.
    let mut aug_rng =
        ChaCha8Rng::seed_from_u64(aug_cfg.rng_seed ^ cfg.seed ^ 0xA5A5_5A5A_0F0F_F0F0);

    let draw = (cfg.batch_size / 2).max(1);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Vgg15Params<f32>)> = None;

    let mut order: Vec<usize> = (0..patches.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut sample_count = 0usize;
        let mut correct = 0usize;

        for (step, chunk) in order.chunks(draw).enumerate() {
            let mini_patches: Vec<Patch> = chunk.iter().map(|&i| patches[i].clone()).collect();
            let mini_labels: Vec<SoftLabel> = chunk.iter().map(|&i| labels[i]).collect();
            let (aug_patches, aug_labels) =
                augment_batch(&mini_patches, &mini_labels, aug_cfg, &mut aug_rng);

            let x = batch_from_patches(&aug_patches);
            let y = targets_tensor(&aug_labels);
            let (probs, cache) = forward_train(&params, &x, &mut rng);
            let batch_loss = kl_data_loss(&y, &probs);
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            sample_count += aug_labels.len();
            correct += count_argmax_matches(&probs, &aug_labels);

            let grads = backward(&params, &cache, &probs, &y, cfg.l2_lambda);
            adam_step(&mut params, &grads, &mut adam, &cfg.adam);
            update_running_stats(&mut params, &cache);
        }

        let reg = 0.5 * cfg.l2_lambda * params.l2_norm_squared();
        let epoch_loss = loss_sum + reg;
        if !epoch_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                step: usize::MAX,
                loss: epoch_loss,
            });
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: epoch_loss,
            mean_patch_loss: loss_sum / sample_count.max(1) as f64,
            train_accuracy: correct as f64 / sample_count.max(1) as f64,
        });
        if best.as_ref().map(|(l, _, _)| epoch_loss < *l).unwrap_or(true) {
            best = Some((epoch_loss, epoch, params.clone()));
        }
    }

    let (best_loss, best_epoch, mut best_params) = best.expect("at least one epoch ran");

    // Short runs leave the slow-moving running statistics far from the final
    // weights' activation distribution; rebuild them from unaugmented
    // training batches before the model is used for inference.
    {
        let mut recal_order: Vec<usize> = (0..patches.len()).collect();
        let mut recal_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DEE_CE66_D5DE_ECE6);
        recal_order.shuffle(&mut recal_rng);
        let bsz = cfg.batch_size.max(16).min(patches.len());
        let batches: Vec<Tensor<f32>> = recal_order
            .chunks(bsz)
            .filter(|c| c.len() == bsz)
            .take(8)
            .map(|chunk| {
                let group: Vec<Patch> = chunk.iter().map(|&i| patches[i].clone()).collect();
                batch_from_patches(&group)
            })
            .collect();
        if !batches.is_empty() {
            recalibrate_running_stats(&mut best_params, &batches);
        }
    }

    if let Some(path) = checkpoint_out {
        save_checkpoint(
            path,
            &best_params,
            kind,
            Some(&norm),
            Some(cfg),
            Some(best_epoch),
            Some(best_loss),
        )?;
    }
    Ok(TrainOutcome {
        params: best_params,
        history,
        norm,
        best_epoch,
        best_loss,
    })
}

fn targets_tensor(labels: &[SoftLabel]) -> Tensor<f32> {
    let mut data = Vec::with_capacity(labels.len() * CLASS_COUNT);
    for l in labels {
        data.extend_from_slice(&l.weights);
    }
    Tensor::from_vec(&[labels.len(), CLASS_COUNT], data)
}

fn count_argmax_matches(probs: &Tensor<f32>, labels: &[SoftLabel]) -> usize {
    probs
        .data
        .chunks(CLASS_COUNT)
        .zip(labels)
        .filter(|(row, label)| {
            let pred = row
                .iter()
                .enumerate()
                .fold(0, |acc, (i, &v)| if v > row[acc] { i } else { acc });
            pred == label.argmax()
        })
        .count()
}

/// Number of segments inferred together (their patches share one batch).
const PREDICT_CHUNK: usize = 6;

/// Runs inference over `records` using stored features: standardize, patch,
/// forward in inference mode, average patch probabilities per segment.
pub fn predict_records(
    params: &Vgg15Params<f32>,
    kind: FeatureKind,
    norm: &NormStats,
    store: &FeatureStore,
    records: &[&SegmentRecord],
    framework: &str,
) -> Result<Vec<SegmentPrediction>, TrainError> {
    let mut predictions = Vec::with_capacity(records.len());
    for group in records.chunks(PREDICT_CHUNK) {
        let mut group_patches: Vec<Patch> = Vec::new();
        let mut spans: Vec<(String, usize)> = Vec::new();
        for r in group {
            let id = r.segment_id();
            if !store.has(&id) {
                return Err(TrainError::MissingFeatures { segment_id: id });
            }
            let mut tensor = store.load(&id)?;
            norm.standardize(kind, &mut tensor);
            let patches = patches_from_feature(&tensor, kind, &id)?;
            spans.push((id, patches.len()));
            group_patches.extend(patches);
        }
        let x = batch_from_patches(&group_patches);
        let probs = forward_infer(params, &x);
        let vectors = probs_to_vectors(&probs);
        let mut offset = 0;
        for (id, len) in spans {
            let segment_probs = &vectors[offset..offset + len];
            offset += len;
            let aggregated = aggregate_segment(segment_probs)
                .expect("every segment yields at least one patch");
            predictions.push(SegmentPrediction::new(id, aggregated, framework.to_string()));
        }
    }
    Ok(predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{DatasetManifest, SceneLabel};
    use crate::dsp::{SPEC_BINS, SPEC_FRAMES};

    fn record(video: &str, label: SceneLabel, split: Split) -> SegmentRecord {
        SegmentRecord {
            video_id: video.to_string(),
            segment_index: 0,
            start_s: 0.0,
            duration_s: 10.0,
            label,
            split,
            audio_path: format!("{video}.wav").into(),
            frames_dir: None,
        }
    }

    fn fast_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_is_an_invalid_config() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
        let cfg = TrainConfig {
            adam: AdamConfig {
                lr: 0.0,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
        let mut cfg = TrainConfig::default();
        cfg.conv_dropout[3] = 1.0;
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn missing_features_are_reported_by_segment() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest::new(vec![
            record("a", SceneLabel::Riot, Split::Train),
            record("b", SceneLabel::MusicEvent, Split::Train),
        ])
        .unwrap();
        let store = FeatureStore::new(dir.path().join("feat"));
        store
            .save(
                "a#0",
                &CstfTensor::new(vec![SPEC_FRAMES, SPEC_BINS], vec![0.0; SPEC_FRAMES * SPEC_BINS]),
            )
            .unwrap();
        match train(
            &manifest,
            &store,
            FeatureKind::Mel,
            &fast_cfg(),
            &AugmentConfig::default(),
            None,
        ) {
            Err(TrainError::MissingFeatures { segment_id }) => assert_eq!(segment_id, "b#0"),
            other => panic!("expected MissingFeatures, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn non_finite_features_abort_with_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest::new(vec![
            record("a", SceneLabel::Riot, Split::Train),
            record("b", SceneLabel::MusicEvent, Split::Train),
        ])
        .unwrap();
        let store = FeatureStore::new(dir.path().join("feat"));
        let mut poisoned = vec![0.5; SPEC_FRAMES * SPEC_BINS];
        poisoned[17] = f32::NAN;
        for id in ["a#0", "b#0"] {
            store
                .save(id, &CstfTensor::new(vec![SPEC_FRAMES, SPEC_BINS], poisoned.clone()))
                .unwrap();
        }
        match train(
            &manifest,
            &store,
            FeatureKind::Mel,
            &fast_cfg(),
            &AugmentConfig::default(),
            None,
        ) {
            Err(TrainError::NonFiniteLoss { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected NonFiniteLoss, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn all_test_manifest_has_no_train_records() {
        let dir = tempfile::tempdir().unwrap();
        let manifest =
            DatasetManifest::new(vec![record("a", SceneLabel::Riot, Split::Test)]).unwrap();
        let store = FeatureStore::new(dir.path().join("feat"));
        assert!(matches!(
            train(
                &manifest,
                &store,
                FeatureKind::Mel,
                &fast_cfg(),
                &AugmentConfig::default(),
                None,
            ),
            Err(TrainError::NoRecords)
        ));
    }

    #[test]
    fn wrong_feature_shape_is_rejected() {
        let tensor = CstfTensor::new(vec![640, 64], vec![0.0; 640 * 64]);
        assert!(matches!(
            patches_from_feature(&tensor, FeatureKind::Mel, "x#0"),
            Err(TrainError::BadFeatureShape { .. })
        ));
        let tensor = CstfTensor::new(vec![2, 3, 64, 64], vec![0.0; 2 * 3 * 64 * 64]);
        assert!(matches!(
            patches_from_feature(&tensor, FeatureKind::Frames, "x#0"),
            Err(TrainError::BadFeatureShape { .. })
        ));
    }

    #[test]
    fn feature_store_sanitizes_ids() {
        let store = FeatureStore::new("/tmp/anywhere");
        let path = store.path_for("video/../../etc#0");
        assert_eq!(path.file_name().unwrap(), "video_.._.._etc_0.cstf");
    }

    #[test]
    fn norm_stats_standardize_spectrograms_per_bin() {
        let mut t = CstfTensor::new(vec![2, 3], vec![1.0, 10.0, 100.0, 3.0, 30.0, 300.0]);
        let stats = NormStats::fit(FeatureKind::Mel, std::slice::from_ref(&t));
        // per-bin means: 2, 20, 200
        assert!((stats.mean[0] - 2.0).abs() < 1e-6);
        assert!((stats.mean[1] - 20.0).abs() < 1e-6);
        assert!((stats.mean[2] - 200.0).abs() < 1e-6);
        stats.standardize(FeatureKind::Mel, &mut t);
        // each bin now has mean 0 and unit spread
        for bin in 0..3 {
            let a = t.data[bin];
            let b = t.data[3 + bin];
            assert!((a + b).abs() < 1e-5, "bin {bin} mean");
            assert!((a - -1.0).abs() < 1e-4 && (b - 1.0).abs() < 1e-4);
        }
    }
}
