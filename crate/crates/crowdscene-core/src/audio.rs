//! WAV input/output. PCM 16-bit is the interchange format; stereo input is
//! downmixed by averaging channels.

use std::io::{Read, Seek};
use std::path::Path;

use thiserror::Error;

use crate::dsp::PcmBuffer;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav format: {0}")]
    Unsupported(String),
    #[error("empty audio stream")]
    Empty,
}

/// Reads a PCM 16-bit WAV file as mono f32 samples in [-1, 1].
pub fn read_wav_mono<P: AsRef<Path>>(path: P) -> Result<PcmBuffer, AudioError> {
    let reader = hound::WavReader::open(path)?;
    decode_mono(reader)
}

/// Same as [`read_wav_mono`] but from an in-memory stream (service uploads).
pub fn read_wav_mono_from<R: Read + Seek>(stream: R) -> Result<PcmBuffer, AudioError> {
    let reader = hound::WavReader::new(stream)?;
    decode_mono(reader)
}

fn decode_mono<R: Read>(mut reader: hound::WavReader<R>) -> Result<PcmBuffer, AudioError> {
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::Unsupported(format!(
            "expected 16-bit integer PCM, got {:?} {} bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels == 0 {
        return Err(AudioError::Unsupported("zero channels".into()));
    }
    let channels = spec.channels as usize;
    let mut samples = Vec::with_capacity(reader.duration() as usize);
    let mut frame = Vec::with_capacity(channels);
    for s in reader.samples::<i16>() {
        frame.push(f32::from(s?) / 32768.0);
        if frame.len() == channels {
            samples.push(frame.iter().sum::<f32>() / channels as f32);
            frame.clear();
        }
    }
    if samples.is_empty() {
        return Err(AudioError::Empty);
    }
    Ok(PcmBuffer {
        samples,
        sample_rate: spec.sample_rate,
    })
}

/// Writes mono f32 samples as PCM 16-bit WAV, clamping to [-1, 1].
pub fn write_wav_mono<P: AsRef<Path>>(
    path: P,
    samples: &[f32],
    sample_rate: u32,
) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_roundtrip_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let samples: Vec<f32> = (0..1000).map(|i| (i as f32 / 100.0).sin() * 0.5).collect();
        write_wav_mono(&path, &samples, 32000).unwrap();
        let pcm = read_wav_mono(&path).unwrap();
        assert_eq!(pcm.sample_rate, 32000);
        assert_eq!(pcm.samples.len(), 1000);
        for (a, b) in pcm.samples.iter().zip(&samples) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn stereo_downmix_averages_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 32000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(16384i16).unwrap(); // left 0.5
            w.write_sample(-16384i16).unwrap(); // right -0.5
        }
        w.finalize().unwrap();
        let pcm = read_wav_mono(&path).unwrap();
        assert_eq!(pcm.samples.len(), 100);
        assert!(pcm.samples.iter().all(|&s| s.abs() < 1e-6));
    }

    #[test]
    fn float_wav_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 32000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_wav_mono(&path),
            Err(AudioError::Unsupported(_))
        ));
    }
}
