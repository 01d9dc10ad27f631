//! Batch feature extraction: audio files (or frame directories) from a
//! manifest into per-segment CSTF tensors in a [`FeatureStore`].
//!
//! Spectrogram features are stored raw (no normalization); standardization
//! statistics are fit at training time and live in the checkpoint.

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{read_wav_mono, AudioError};
use crate::cstf::{CstfError, CstfTensor};
use crate::dsp::{
    self, cqt_spectrogram_with, gam_spectrogram_with, image, mel_spectrogram, resample, CqtKernels,
    DspConfig, DspError, FeatureKind, GammatoneBank, PcmBuffer, SpecKind,
};
use crate::manifest::{SegmentRecord, Split};
use crate::nn::FeatureStore;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{segment_id}: {source}")]
    Audio {
        segment_id: String,
        source: AudioError,
    },
    #[error("{segment_id}: {source}")]
    Dsp {
        segment_id: String,
        source: DspError,
    },
    #[error("{segment_id}: {source}")]
    Store {
        segment_id: String,
        source: CstfError,
    },
    #[error("{segment_id}: frames requested but the record has no frames_dir")]
    MissingFramesDir { segment_id: String },
}

/// One frontend with its precomputed state, reusable across segments.
pub struct FeatureExtractor {
    pub kind: FeatureKind,
    pub cfg: DspConfig,
    cqt: Option<CqtKernels>,
    gam: Option<GammatoneBank>,
}

impl FeatureExtractor {
    pub fn new(kind: FeatureKind, cfg: DspConfig) -> Self {
        let cqt = matches!(kind, FeatureKind::Cqt).then(|| CqtKernels::build(&cfg));
        let gam = matches!(kind, FeatureKind::Gam).then(|| GammatoneBank::build(&cfg));
        Self {
            kind,
            cfg,
            cqt,
            gam,
        }
    }

    /// Resamples to the pipeline rate and computes the spectrogram tensor
    /// `[frames, 128]`. Not applicable to the frames kind.
    pub fn extract_audio(&self, pcm: &PcmBuffer) -> Result<CstfTensor, DspError> {
        let spec_kind = self
            .kind
            .spec_kind()
            .expect("extract_audio requires a spectrogram kind");
        let pcm = if pcm.sample_rate == self.cfg.sample_rate {
            pcm.clone()
        } else {
            resample(pcm, self.cfg.sample_rate)?
        };
        let spec = match spec_kind {
            SpecKind::Mel => mel_spectrogram(&pcm, &self.cfg)?,
            SpecKind::Cqt => {
                cqt_spectrogram_with(self.cqt.as_ref().expect("kernels built"), &pcm, &self.cfg)?
            }
            SpecKind::Gam => {
                gam_spectrogram_with(self.gam.as_ref().expect("bank built"), &pcm, &self.cfg)?
            }
        };
        Ok(CstfTensor::new(
            vec![spec.frames, spec.bins],
            spec.values,
        ))
    }

    /// Extracts the feature tensor for one manifest record.
    pub fn extract_record(&self, record: &SegmentRecord) -> Result<CstfTensor, FeatureError> {
        let segment_id = record.segment_id();
        match self.kind {
            FeatureKind::Frames => {
                let dir = record.frames_dir.as_ref().ok_or_else(|| {
                    FeatureError::MissingFramesDir {
                        segment_id: segment_id.clone(),
                    }
                })?;
                let patches =
                    image::frames_to_patches(dir, &segment_id).map_err(|source| {
                        FeatureError::Dsp {
                            segment_id: segment_id.clone(),
                            source,
                        }
                    })?;
                if patches.is_empty() {
                    return Err(FeatureError::Dsp {
                        segment_id,
                        source: DspError::BadImage("frames_dir holds no images".into()),
                    });
                }
                let n = patches.len();
                let mut data = Vec::with_capacity(n * 3 * dsp::PATCH_SIDE * dsp::PATCH_SIDE);
                for p in &patches {
                    data.extend_from_slice(&p.values);
                }
                Ok(CstfTensor::new(
                    vec![n, 3, dsp::PATCH_SIDE, dsp::PATCH_SIDE],
                    data,
                ))
            }
            _ => {
                let pcm = read_wav_mono(&record.audio_path).map_err(|source| {
                    FeatureError::Audio {
                        segment_id: segment_id.clone(),
                        source,
                    }
                })?;
                self.extract_audio(&pcm).map_err(|source| FeatureError::Dsp {
                    segment_id,
                    source,
                })
            }
        }
    }
}

/// Extracts features for every record (optionally one split) into `store`,
/// in parallel. Returns the number of segments written.
pub fn extract_to_store(
    records: &[SegmentRecord],
    split: Option<Split>,
    kind: FeatureKind,
    cfg: &DspConfig,
    store: &FeatureStore,
) -> Result<usize, FeatureError> {
    let extractor = FeatureExtractor::new(kind, cfg.clone());
    let selected: Vec<&SegmentRecord> = records
        .iter()
        .filter(|r| split.map(|s| r.split == s).unwrap_or(true))
        .collect();
    let results: Result<Vec<()>, FeatureError> = selected
        .par_iter()
        .map(|record| {
            let tensor = extractor.extract_record(record)?;
            store
                .save(&record.segment_id(), &tensor)
                .map_err(|source| FeatureError::Store {
                    segment_id: record.segment_id(),
                    source,
                })
        })
        .collect();
    results?;
    Ok(selected.len())
}
