//! Training-time augmentation: zero-masking of one frequency band and one
//! time band per patch, and mixup of patch pairs with convex weights.
//!
//! Both outputs of a mixup pair conserve mass: X_mx1 + X_mx2 == X_A + X_B
//! and likewise for labels, for every gamma.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{Patch, PATCH_SIDE};
use crate::CLASS_COUNT;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("patch shapes differ: {a} vs {b} channels")]
    ShapeMismatch { a: usize, b: usize },
}

/// Distribution the mixup coefficient is drawn from. Uniform(0,1) is the
/// default; Beta is available for the conventional mixup parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaDist {
    Uniform01,
    Beta { alpha: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Width of the zeroed frequency band in bins.
    pub freq_mask_width: usize,
    /// Width of the zeroed time band in frames.
    pub time_mask_width: usize,
    pub mixup_gamma_dist: GammaDist,
    /// Probability that masking is applied to a given patch.
    pub apply_probability: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            freq_mask_width: 10,
            time_mask_width: 10,
            mixup_gamma_dist: GammaDist::Uniform01,
            apply_probability: 1.0,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.freq_mask_width > PATCH_SIDE || self.time_mask_width > PATCH_SIDE {
            return Err(format!(
                "mask widths ({}, {}) exceed patch side {PATCH_SIDE}",
                self.freq_mask_width, self.time_mask_width
            ));
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(format!(
                "apply_probability {} outside [0, 1]",
                self.apply_probability
            ));
        }
        Ok(())
    }
}

/// A soft class assignment: non-negative weights over the five classes
/// summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftLabel {
    pub weights: [f32; CLASS_COUNT],
}

impl SoftLabel {
    pub fn one_hot(class: usize) -> Self {
        assert!(class < CLASS_COUNT);
        let mut weights = [0.0; CLASS_COUNT];
        weights[class] = 1.0;
        Self { weights }
    }

    pub fn new(weights: [f32; CLASS_COUNT]) -> Self {
        let sum: f32 = weights.iter().sum();
        assert!(
            (sum - 1.0).abs() < 1e-5 && weights.iter().all(|&w| w >= 0.0),
            "soft label must be a distribution, got {weights:?}"
        );
        Self { weights }
    }

    /// Class with the largest weight, lowest code on ties.
    pub fn argmax(&self) -> usize {
        self.weights
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &w)| if w > self.weights[acc] { i } else { acc })
    }
}

/// Zeroes one contiguous band of `freq_mask_width` bins and one band of
/// `time_mask_width` frames, positions drawn uniformly. Mask positions are
/// shared across channels. Width zero is a no-op for that axis.
pub fn spec_augment<R: Rng>(patch: &Patch, cfg: &AugmentConfig, rng: &mut R) -> Patch {
    let mut out = patch.clone();
    if cfg.apply_probability < 1.0 && rng.random::<f64>() >= cfg.apply_probability {
        return out;
    }
    let side = PATCH_SIDE;
    if cfg.freq_mask_width > 0 {
        let w = cfg.freq_mask_width.min(side);
        let f0 = rng.random_range(0..=side - w);
        for c in 0..out.channels {
            for t in 0..side {
                let row = (c * side + t) * side;
                out.values[row + f0..row + f0 + w].fill(0.0);
            }
        }
    }
    if cfg.time_mask_width > 0 {
        let w = cfg.time_mask_width.min(side);
        let t0 = rng.random_range(0..=side - w);
        for c in 0..out.channels {
            let start = (c * side + t0) * side;
            out.values[start..start + w * side].fill(0.0);
        }
    }
    out
}

/// Mixes two patches and their labels with weight `gamma`:
///
/// ```text
/// X_mx1 = g X_A + (1-g) X_B        y_mx1 = g y_A + (1-g) y_B
/// X_mx2 = (1-g) X_A + g X_B        y_mx2 = (1-g) y_A + g y_B
/// ```
pub fn mixup_pair(
    x_a: &Patch,
    y_a: &SoftLabel,
    x_b: &Patch,
    y_b: &SoftLabel,
    gamma: f32,
) -> Result<(Patch, SoftLabel, Patch, SoftLabel), AugmentError> {
    assert!(
        (0.0..=1.0).contains(&gamma),
        "gamma {gamma} outside [0, 1]"
    );
    if x_a.channels != x_b.channels || x_a.values.len() != x_b.values.len() {
        return Err(AugmentError::ShapeMismatch {
            a: x_a.channels,
            b: x_b.channels,
        });
    }
    let mix =
        |p: f32, q: f32, g: f32| -> f32 { g * p + (1.0 - g) * q };
    let mut x1 = x_a.clone();
    let mut x2 = x_b.clone();
    for ((v1, v2), (&a, &b)) in x1
        .values
        .iter_mut()
        .zip(x2.values.iter_mut())
        .zip(x_a.values.iter().zip(x_b.values.iter()))
    {
        *v1 = mix(a, b, gamma);
        *v2 = mix(b, a, gamma);
    }
    let mut w1 = [0.0f32; CLASS_COUNT];
    let mut w2 = [0.0f32; CLASS_COUNT];
    for c in 0..CLASS_COUNT {
        w1[c] = mix(y_a.weights[c], y_b.weights[c], gamma);
        w2[c] = mix(y_b.weights[c], y_a.weights[c], gamma);
    }
    Ok((
        x1,
        SoftLabel { weights: w1 },
        x2,
        SoftLabel { weights: w2 },
    ))
}

fn draw_gamma<R: Rng>(dist: GammaDist, rng: &mut R) -> f32 {
    match dist {
        GammaDist::Uniform01 => rng.random::<f32>(),
        GammaDist::Beta { alpha } => {
            let beta = Beta::new(alpha, alpha).expect("alpha must be positive");
            beta.sample(rng) as f32
        }
    }
}

/// Masks each patch (subject to `apply_probability`), then appends one mixed
/// copy per item formed by pairing it with a random partner; the batch size
/// doubles. Masking runs before mixing.
pub fn augment_batch<R: Rng>(
    patches: &[Patch],
    labels: &[SoftLabel],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> (Vec<Patch>, Vec<SoftLabel>) {
    assert!(!patches.is_empty(), "batch must be non-empty");
    assert_eq!(patches.len(), labels.len());

    let masked: Vec<Patch> = patches.iter().map(|p| spec_augment(p, cfg, rng)).collect();

    // Random partner assignment: a shuffled index vector.
    let mut partners: Vec<usize> = (0..masked.len()).collect();
    for i in (1..partners.len()).rev() {
        let j = rng.random_range(0..=i);
        partners.swap(i, j);
    }

    let mut out_patches = masked.clone();
    let mut out_labels = labels.to_vec();
    for (i, &j) in partners.iter().enumerate() {
        let gamma = draw_gamma(cfg.mixup_gamma_dist, rng);
        let (x1, y1, _, _) =
            mixup_pair(&masked[i], &labels[i], &masked[j], &labels[j], gamma)
                .expect("same-source patches always share shape");
        out_patches.push(x1);
        out_labels.push(y1);
    }
    (out_patches, out_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::PatchSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones_patch() -> Patch {
        Patch::new(
            vec![1.0; PATCH_SIDE * PATCH_SIDE],
            1,
            PatchSource {
                segment_id: "s".into(),
                patch_index: 0,
            },
        )
    }

    fn random_patch(rng: &mut ChaCha8Rng) -> Patch {
        Patch::new(
            (0..PATCH_SIDE * PATCH_SIDE)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect(),
            1,
            PatchSource {
                segment_id: "s".into(),
                patch_index: 0,
            },
        )
    }

    #[test]
    fn mask_zero_count_matches_inclusion_exclusion() {
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = spec_augment(&ones_patch(), &cfg, &mut rng);
        let zeros = out.values.iter().filter(|&&v| v == 0.0).count();
        // 10*128 + 128*10 - 10*10
        assert_eq!(zeros, 2460);
        // untouched cells keep their value exactly
        assert!(out.values.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn zero_widths_are_identity() {
        let cfg = AugmentConfig {
            freq_mask_width: 0,
            time_mask_width: 0,
            ..AugmentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let patch = random_patch(&mut rng);
        let out = spec_augment(&patch, &cfg, &mut rng);
        assert_eq!(out.values, patch.values);
    }

    #[test]
    fn same_seed_gives_identical_masks() {
        let cfg = AugmentConfig::default();
        let patch = ones_patch();
        let a = spec_augment(&patch, &cfg, &mut ChaCha8Rng::seed_from_u64(99));
        let b = spec_augment(&patch, &cfg, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn multichannel_masks_share_positions() {
        let cfg = AugmentConfig::default();
        let patch = Patch::new(
            vec![1.0; 3 * PATCH_SIDE * PATCH_SIDE],
            3,
            PatchSource {
                segment_id: "s".into(),
                patch_index: 0,
            },
        );
        let out = spec_augment(&patch, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let per_channel: Vec<Vec<f32>> = (0..3)
            .map(|c| {
                out.values[c * PATCH_SIDE * PATCH_SIDE..(c + 1) * PATCH_SIDE * PATCH_SIDE].to_vec()
            })
            .collect();
        assert_eq!(per_channel[0], per_channel[1]);
        assert_eq!(per_channel[1], per_channel[2]);
    }

    #[test]
    fn mixup_gamma_half_of_equal_inputs_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_patch(&mut rng);
        let (y_a, y_b) = (SoftLabel::one_hot(0), SoftLabel::one_hot(2));
        let (x1, y1, x2, y2) = mixup_pair(&x, &y_a, &x, &y_b, 0.5).unwrap();
        for (v, o) in x1.values.iter().zip(&x.values) {
            assert!((v - o).abs() < 1e-7);
        }
        assert_eq!(x1.values, x2.values);
        for c in 0..CLASS_COUNT {
            let avg = (y_a.weights[c] + y_b.weights[c]) / 2.0;
            assert!((y1.weights[c] - avg).abs() < 1e-7);
            assert!((y2.weights[c] - avg).abs() < 1e-7);
        }
    }

    #[test]
    fn mixup_gamma_one_returns_inputs_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (random_patch(&mut rng), random_patch(&mut rng));
        let (y_a, y_b) = (SoftLabel::one_hot(1), SoftLabel::one_hot(3));
        let (x1, y1, x2, y2) = mixup_pair(&a, &y_a, &b, &y_b, 1.0).unwrap();
        assert_eq!(x1.values, a.values);
        assert_eq!(x2.values, b.values);
        assert_eq!(y1, y_a);
        assert_eq!(y2, y_b);
    }

    #[test]
    fn mixup_soft_label_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random_patch(&mut rng), random_patch(&mut rng));
        let (_, y1, _, y2) =
            mixup_pair(&a, &SoftLabel::one_hot(0), &b, &SoftLabel::one_hot(1), 0.7).unwrap();
        assert!((y1.weights[0] - 0.7).abs() < 1e-6);
        assert!((y1.weights[1] - 0.3).abs() < 1e-6);
        assert!(y1.weights[2..].iter().all(|&w| w == 0.0));
        assert!((y2.weights[0] - 0.3).abs() < 1e-6);
        assert!((y2.weights[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn mixup_swaps_symmetrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (random_patch(&mut rng), random_patch(&mut rng));
        let (y_a, y_b) = (SoftLabel::one_hot(0), SoftLabel::one_hot(4));
        let fwd = mixup_pair(&a, &y_a, &b, &y_b, 0.3).unwrap();
        let rev = mixup_pair(&b, &y_b, &a, &y_a, 0.3).unwrap();
        assert_eq!(fwd.0.values, rev.2.values);
        assert_eq!(fwd.2.values, rev.0.values);
        assert_eq!(fwd.1, rev.3);
        assert_eq!(fwd.3, rev.1);
    }

    #[test]
    fn batch_doubles_and_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let patches: Vec<Patch> = (0..8).map(|_| random_patch(&mut rng)).collect();
        let labels: Vec<SoftLabel> = (0..8).map(|i| SoftLabel::one_hot(i % 5)).collect();
        let cfg = AugmentConfig::default();
        let (p1, l1) = augment_batch(&patches, &labels, &cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let (p2, l2) = augment_batch(&patches, &labels, &cfg, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(p1.len(), 16);
        assert_eq!(l1.len(), 16);
        assert_eq!(
            p1.iter().map(|p| p.values.clone()).collect::<Vec<_>>(),
            p2.iter().map(|p| p.values.clone()).collect::<Vec<_>>()
        );
        assert_eq!(l1, l2);
    }

    #[test]
    fn mixup_outputs_conserve_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (a, b) = (random_patch(&mut rng), random_patch(&mut rng));
            let gamma = rng.random::<f32>();
            let (x1, y1, x2, y2) =
                mixup_pair(&a, &SoftLabel::one_hot(0), &b, &SoftLabel::one_hot(1), gamma).unwrap();
            for i in 0..a.values.len() {
                let lhs = x1.values[i] + x2.values[i];
                let rhs = a.values[i] + b.values[i];
                assert!((lhs - rhs).abs() < 1e-6, "mass violated at {i}");
            }
            for c in 0..CLASS_COUNT {
                let lhs = y1.weights[c] + y2.weights[c];
                let rhs = 1.0 * (c == 0) as u8 as f32 + 1.0 * (c == 1) as u8 as f32;
                assert!((lhs - rhs).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_patch(&mut rng);
        let b = Patch::new(
            vec![0.0; 3 * PATCH_SIDE * PATCH_SIDE],
            3,
            PatchSource {
                segment_id: "s".into(),
                patch_index: 0,
            },
        );
        assert!(matches!(
            mixup_pair(&a, &SoftLabel::one_hot(0), &b, &SoftLabel::one_hot(1), 0.5),
            Err(AugmentError::ShapeMismatch { .. })
        ));
    }
}
