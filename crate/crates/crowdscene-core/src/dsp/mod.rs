//! Time-frequency frontends and patch extraction.
//!
//! All three spectrogram kinds share one geometry contract: a 10-second
//! segment at 32 kHz produces a 640x128 (frames x bins) matrix, which
//! [`patchify`] tiles into five 128x128 patches along the time axis.
//!
//! The stated 14 ms hop does not divide 10 s into 640 frames, so the hop is
//! fixed at 500 samples (15.625 ms): 320000 / 500 = 640 exactly. The 640x128
//! output geometry is treated as authoritative because the patch count and
//! the classifier input size depend on it.

mod cqt;
mod gammatone;
pub mod image;
mod mel;
mod resample;
mod stft;

pub use cqt::{cqt_spectrogram, cqt_spectrogram_with, CqtKernels};
pub use gammatone::{gam_spectrogram, gam_spectrogram_with, gammatone_center_freqs, GammatoneBank};
pub use mel::{mel_filterbank, mel_spectrogram};
pub use resample::resample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical sample rate of the pipeline.
pub const SAMPLE_RATE: u32 = 32_000;
/// Side length of classifier patches (frames and bins).
pub const PATCH_SIDE: usize = 128;
/// Frequency bins / filterbank channels for every spectrogram kind.
pub const SPEC_BINS: usize = 128;
/// Frames of a canonical 10-second spectrogram.
pub const SPEC_FRAMES: usize = 640;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("empty input signal")]
    EmptyInput,
    #[error("expected {expected} Hz input, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("input too short: {samples} samples yield no full frame (hop {hop})")]
    TooShort { samples: usize, hop: usize },
    #[error("patchify requires {expected} bins, got {actual}")]
    BadBins { expected: usize, actual: usize },
    #[error("image error: {0}")]
    BadImage(String),
}

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl PcmBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Mel,
    Cqt,
    Gam,
}

impl SpecKind {
    pub fn name(self) -> &'static str {
        match self {
            SpecKind::Mel => "mel",
            SpecKind::Cqt => "cqt",
            SpecKind::Gam => "gam",
        }
    }
}

impl std::fmt::Display for SpecKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What a feature file holds: one of the spectrogram kinds, or stacks of
/// 128x128x3 image frames for the visual stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mel,
    Cqt,
    Gam,
    Frames,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mel => "mel",
            FeatureKind::Cqt => "cqt",
            FeatureKind::Gam => "gam",
            FeatureKind::Frames => "frames",
        }
    }

    pub fn from_name(s: &str) -> Option<FeatureKind> {
        match s {
            "mel" => Some(FeatureKind::Mel),
            "cqt" => Some(FeatureKind::Cqt),
            "gam" => Some(FeatureKind::Gam),
            "frames" => Some(FeatureKind::Frames),
            _ => None,
        }
    }

    pub fn spec_kind(self) -> Option<SpecKind> {
        match self {
            FeatureKind::Mel => Some(SpecKind::Mel),
            FeatureKind::Cqt => Some(SpecKind::Cqt),
            FeatureKind::Gam => Some(SpecKind::Gam),
            FeatureKind::Frames => None,
        }
    }

    pub fn channels(self) -> usize {
        match self {
            FeatureKind::Frames => 3,
            _ => 1,
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Frontend parameters. The defaults realize the canonical geometry; they are
/// overridable for experiments but tests pin the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DspConfig {
    pub sample_rate: u32,
    /// Analysis window length in samples (80 ms at 32 kHz).
    pub window_len: usize,
    /// FFT size the window is zero-padded to.
    pub fft_len: usize,
    /// Hop in samples shared by all frontends (500 -> 640 frames per 10 s).
    pub hop: usize,
    pub mel_fmin_hz: f32,
    pub mel_fmax_hz: f32,
    pub cqt_fmin_hz: f32,
    pub cqt_bins_per_octave: usize,
    /// Internal CQT hop; the frame axis is then resampled to the shared
    /// frame count.
    pub cqt_internal_hop: usize,
    pub gam_fmin_hz: f32,
    pub gam_fmax_hz: f32,
    /// Floor added before the log: log(x + eps).
    pub log_eps: f32,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            window_len: 2560,
            fft_len: 4096,
            hop: 500,
            mel_fmin_hz: 20.0,
            mel_fmax_hz: 16_000.0,
            cqt_fmin_hz: 32.7,
            cqt_bins_per_octave: 16,
            cqt_internal_hop: 4000,
            gam_fmin_hz: 50.0,
            gam_fmax_hz: 16_000.0,
            log_eps: 1e-10,
        }
    }
}

impl DspConfig {
    /// Number of frames the shared geometry produces for `samples` input
    /// samples.
    pub fn frame_count(&self, samples: usize) -> usize {
        samples / self.hop
    }
}

/// A time-major (frames x bins) log-power matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub kind: SpecKind,
    /// Row-major frames x bins.
    pub values: Vec<f32>,
    pub frames: usize,
    pub bins: usize,
    pub hop_samples: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn at(&self, frame: usize, bin: usize) -> f32 {
        self.values[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f32] {
        &self.values[frame * self.bins..(frame + 1) * self.bins]
    }

    /// Index of the strongest bin of one frame (first wins on ties).
    pub fn frame_argmax(&self, frame: usize) -> usize {
        let row = self.frame(frame);
        row.iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| if v > row[acc] { i } else { acc })
    }
}

/// Identifies where a patch came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSource {
    pub segment_id: String,
    pub patch_index: usize,
}

/// A 128x128 tile, single-channel for spectrograms or three-channel for
/// image frames. Layout is channel-major: `[channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: Vec<f32>,
    pub channels: usize,
    pub source: PatchSource,
}

impl Patch {
    pub fn new(values: Vec<f32>, channels: usize, source: PatchSource) -> Self {
        assert_eq!(
            values.len(),
            channels * PATCH_SIDE * PATCH_SIDE,
            "patch must be {channels}x{PATCH_SIDE}x{PATCH_SIDE}"
        );
        Self {
            values,
            channels,
            source,
        }
    }

    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.values[(channel * PATCH_SIDE + row) * PATCH_SIDE + col]
    }
}

/// Cuts non-overlapping 128-frame tiles along the time axis; the trailing
/// remainder (frames not filling a full tile) is dropped.
pub fn patchify(spec: &Spectrogram, segment_id: &str) -> Result<Vec<Patch>, DspError> {
    if spec.bins != PATCH_SIDE {
        return Err(DspError::BadBins {
            expected: PATCH_SIDE,
            actual: spec.bins,
        });
    }
    let count = spec.frames / PATCH_SIDE;
    let mut patches = Vec::with_capacity(count);
    for p in 0..count {
        let start = p * PATCH_SIDE * spec.bins;
        let end = start + PATCH_SIDE * spec.bins;
        patches.push(Patch::new(
            spec.values[start..end].to_vec(),
            1,
            PatchSource {
                segment_id: segment_id.to_string(),
                patch_index: p,
            },
        ));
    }
    Ok(patches)
}

/// Dispatches to the frontend for `kind`.
pub fn spectrogram(
    pcm: &PcmBuffer,
    kind: SpecKind,
    cfg: &DspConfig,
) -> Result<Spectrogram, DspError> {
    match kind {
        SpecKind::Mel => mel_spectrogram(pcm, cfg),
        SpecKind::Cqt => cqt_spectrogram(pcm, cfg),
        SpecKind::Gam => gam_spectrogram(pcm, cfg),
    }
}

pub(crate) fn check_input(pcm: &PcmBuffer, cfg: &DspConfig) -> Result<usize, DspError> {
    if pcm.samples.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if pcm.sample_rate != cfg.sample_rate {
        return Err(DspError::WrongRate {
            expected: cfg.sample_rate,
            actual: pcm.sample_rate,
        });
    }
    let frames = cfg.frame_count(pcm.samples.len());
    if frames == 0 {
        return Err(DspError::TooShort {
            samples: pcm.samples.len(),
            hop: cfg.hop,
        });
    }
    Ok(frames)
}
