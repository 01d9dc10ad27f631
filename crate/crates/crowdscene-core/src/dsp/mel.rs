//! Log-mel spectrogram: 128 triangular filters on the Slaney mel scale,
//! 20 Hz - 16 kHz, area-normalized, natural-log compressed.

use super::stft::power_frames;
use super::{check_input, DspConfig, DspError, PcmBuffer, SpecKind, Spectrogram, SPEC_BINS};

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
fn hz_to_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if hz >= min_log_hz {
        min_log_mel + (hz / min_log_hz).ln() / logstep
    } else {
        hz / f_sp
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = (6.4f64).ln() / 27.0;
    if mel >= min_log_mel {
        min_log_hz * (logstep * (mel - min_log_mel)).exp()
    } else {
        f_sp * mel
    }
}

/// Triangular filterbank, row-major `SPEC_BINS x (fft_len/2 + 1)`.
/// Each filter is area-normalized by `2 / (f_hi - f_lo)`.
pub fn mel_filterbank(cfg: &DspConfig) -> Vec<f32> {
    let n_filters = SPEC_BINS;
    let n_fft_bins = cfg.fft_len / 2 + 1;
    let mel_lo = hz_to_mel(f64::from(cfg.mel_fmin_hz));
    let mel_hi = hz_to_mel(f64::from(cfg.mel_fmax_hz));
    // n_filters + 2 edge frequencies, equally spaced in mel.
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_fft_bins)
        .map(|k| k as f64 * f64::from(cfg.sample_rate) / cfg.fft_len as f64)
        .collect();

    let mut fb = vec![0.0f32; n_filters * n_fft_bins];
    for m in 0..n_filters {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        for (k, &f) in bin_hz.iter().enumerate() {
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            if w > 0.0 {
                fb[m * n_fft_bins + k] = (w * norm) as f32;
            }
        }
    }
    fb
}

/// 640x128 log-mel spectrogram of a 10-second 32 kHz segment (frames scale
/// with input length as `floor(samples / hop)`).
pub fn mel_spectrogram(pcm: &PcmBuffer, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    let frames = check_input(pcm, cfg)?;
    let fb = mel_filterbank(cfg);
    let n_fft_bins = cfg.fft_len / 2 + 1;
    let power = power_frames(&pcm.samples, frames, cfg.window_len, cfg.fft_len, cfg.hop);

    let mut values = vec![0.0f32; frames * SPEC_BINS];
    for (t, frame_power) in power.iter().enumerate() {
        for m in 0..SPEC_BINS {
            let row = &fb[m * n_fft_bins..(m + 1) * n_fft_bins];
            let energy: f32 = row
                .iter()
                .zip(frame_power.iter())
                .map(|(w, p)| w * p)
                .sum();
            values[t * SPEC_BINS + m] = (energy + cfg.log_eps).ln();
        }
    }
    Ok(Spectrogram {
        kind: SpecKind::Mel,
        values,
        frames,
        bins: SPEC_BINS,
        hop_samples: cfg.hop,
        sample_rate: cfg.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_signals::{silence, sine};
    use super::*;
    use crate::dsp::{SAMPLE_RATE, SPEC_FRAMES};

    #[test]
    fn canonical_geometry_is_640_by_128() {
        let pcm = sine(1000.0, 10.0, SAMPLE_RATE);
        let spec = mel_spectrogram(&pcm, &DspConfig::default()).unwrap();
        assert_eq!(spec.frames, SPEC_FRAMES);
        assert_eq!(spec.bins, SPEC_BINS);
        assert!(spec.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silence_is_exactly_the_log_floor() {
        let cfg = DspConfig::default();
        let spec = mel_spectrogram(&silence(10.0, SAMPLE_RATE), &cfg).unwrap();
        let floor = cfg.log_eps.ln();
        assert!(spec.values.iter().all(|&v| v == floor));
    }

    /// Independent oracle: the expected argmax bin is computed from the
    /// filterbank matrix applied to a directly-evaluated DFT power spectrum
    /// of the windowed tone, bypassing the spectrogram path entirely.
    #[test]
    fn pure_tone_argmax_matches_filterbank_oracle() {
        let cfg = DspConfig::default();
        let freq = 1000.0f64;
        let fb = mel_filterbank(&cfg);
        let n_fft_bins = cfg.fft_len / 2 + 1;

        // Naive DFT of one Hann-windowed tone frame.
        let window = super::super::stft::hann(cfg.window_len);
        let mut power = vec![0.0f64; n_fft_bins];
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (n, &w) in window.iter().enumerate() {
                let x = f64::from(w)
                    * (2.0 * std::f64::consts::PI * freq * n as f64 / f64::from(SAMPLE_RATE)).sin()
                    * 0.5;
                let phase = -2.0 * std::f64::consts::PI * k as f64 * n as f64 / cfg.fft_len as f64;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            *p = re * re + im * im;
        }
        let responses: Vec<f64> = (0..SPEC_BINS)
            .map(|m| {
                fb[m * n_fft_bins..(m + 1) * n_fft_bins]
                    .iter()
                    .zip(&power)
                    .map(|(&w, &p)| f64::from(w) * p)
                    .sum::<f64>()
            })
            .collect();
        let expected = responses
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| if v > responses[acc] { i } else { acc });

        let pcm = sine(freq as f32, 10.0, SAMPLE_RATE);
        let spec = mel_spectrogram(&pcm, &cfg).unwrap();
        for t in 0..spec.frames {
            assert_eq!(
                spec.frame_argmax(t),
                expected,
                "frame {t} argmax deviates from oracle bin {expected}"
            );
        }
    }

    #[test]
    fn every_filter_row_is_nonnegative_with_support() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank(&cfg);
        let n_fft_bins = cfg.fft_len / 2 + 1;
        for m in 0..SPEC_BINS {
            let row = &fb[m * n_fft_bins..(m + 1) * n_fft_bins];
            assert!(row.iter().all(|&w| w >= 0.0), "filter {m} has negatives");
            assert!(row.iter().any(|&w| w > 0.0), "filter {m} has no support");
        }
    }

    #[test]
    fn wrong_rate_and_short_inputs_error() {
        let cfg = DspConfig::default();
        let wrong = sine(440.0, 1.0, 16_000);
        assert!(matches!(
            mel_spectrogram(&wrong, &cfg),
            Err(DspError::WrongRate { .. })
        ));
        let short = PcmBuffer::new(vec![0.1; 100], SAMPLE_RATE);
        assert!(matches!(
            mel_spectrogram(&short, &cfg),
            Err(DspError::TooShort { .. })
        ));
        let empty = PcmBuffer::new(vec![], SAMPLE_RATE);
        assert!(matches!(
            mel_spectrogram(&empty, &cfg),
            Err(DspError::EmptyInput)
        ));
    }

    #[test]
    fn deterministic_for_identical_input() {
        let cfg = DspConfig::default();
        let pcm = sine(523.25, 10.0, SAMPLE_RATE);
        let a = mel_spectrogram(&pcm, &cfg).unwrap();
        let b = mel_spectrogram(&pcm, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }
}
