//! Constant-Q transform: 128 log-spaced bins (16 per octave from 32.7 Hz),
//! realized as sparse spectral kernels applied to zero-padded FFT frames.
//!
//! Low bins need kernels longer than the shared analysis window, so the
//! transform runs on its own internal hop and the frame axis is then
//! linearly resampled to the shared `floor(samples / hop)` frame count.

use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;

use super::stft::hann;
use super::{check_input, DspConfig, DspError, PcmBuffer, SpecKind, Spectrogram, SPEC_BINS};

/// Precomputed sparse spectral kernels, reusable across segments.
pub struct CqtKernels {
    fft_len: usize,
    /// Per CQT bin: (fft bin, conjugated kernel coefficient).
    rows: Vec<Vec<(u32, Complex32)>>,
}

impl CqtKernels {
    pub fn build(cfg: &DspConfig) -> Self {
        let q = 1.0 / (2f64.powf(1.0 / cfg.cqt_bins_per_octave as f64) - 1.0);
        let fs = f64::from(cfg.sample_rate);
        let lengths: Vec<usize> = (0..SPEC_BINS)
            .map(|b| {
                let fc = Self::center_freq(cfg, b);
                ((q * fs / fc).ceil() as usize).max(2)
            })
            .collect();
        let fft_len = lengths.iter().max().unwrap().next_power_of_two();
        let fft = FftPlanner::<f32>::new().plan_fft_forward(fft_len);

        let rows = (0..SPEC_BINS)
            .map(|b| {
                let fc = Self::center_freq(cfg, b);
                let len = lengths[b];
                let window = hann(len);
                let mut buf = vec![Complex32::new(0.0, 0.0); fft_len];
                // Kernel centered in the frame so responses align with the
                // frame center.
                let offset = (fft_len - len) / 2;
                for (n, &w) in window.iter().enumerate() {
                    let phase = 2.0 * std::f64::consts::PI * fc * (n as f64 - len as f64 / 2.0) / fs;
                    let amp = f64::from(w) / len as f64;
                    buf[offset + n] = Complex32::new(
                        (amp * phase.cos()) as f32,
                        (amp * phase.sin()) as f32,
                    );
                }
                fft.process(&mut buf);
                let max_mag = buf.iter().map(|c| c.norm()).fold(0.0f32, f32::max);
                let thresh = max_mag * 1e-3;
                buf.iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() > thresh)
                    .map(|(k, c)| (k as u32, c.conj() / fft_len as f32))
                    .collect()
            })
            .collect();
        Self { fft_len, rows }
    }

    pub fn center_freq(cfg: &DspConfig, bin: usize) -> f64 {
        f64::from(cfg.cqt_fmin_hz) * 2f64.powf(bin as f64 / cfg.cqt_bins_per_octave as f64)
    }

    /// CQT bin whose center frequency is nearest to `freq`.
    pub fn nearest_bin(cfg: &DspConfig, freq: f64) -> usize {
        let exact = (freq / f64::from(cfg.cqt_fmin_hz)).log2() * cfg.cqt_bins_per_octave as f64;
        exact.round().clamp(0.0, (SPEC_BINS - 1) as f64) as usize
    }

    /// Power per CQT bin for frames centered at `t * hop`.
    fn power_frames(&self, signal: &[f32], frames: usize, hop: usize) -> Vec<Vec<f32>> {
        let fft = FftPlanner::<f32>::new().plan_fft_forward(self.fft_len);
        let half = self.fft_len / 2;
        let mut buf = vec![Complex32::new(0.0, 0.0); self.fft_len];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let center = t * hop;
            buf.fill(Complex32::new(0.0, 0.0));
            let lo = center as isize - half as isize;
            for (n, slot) in buf.iter_mut().enumerate() {
                let idx = lo + n as isize;
                if idx >= 0 && (idx as usize) < signal.len() {
                    *slot = Complex32::new(signal[idx as usize], 0.0);
                }
            }
            fft.process(&mut buf);
            out.push(
                self.rows
                    .iter()
                    .map(|row| {
                        let mut acc = Complex32::new(0.0, 0.0);
                        for &(k, coeff) in row {
                            acc += buf[k as usize] * coeff;
                        }
                        acc.norm_sqr()
                    })
                    .collect(),
            );
        }
        out
    }
}

/// Linearly resamples the frame axis of `rows` (each `bins` wide) to
/// `target` frames.
fn resample_time(rows: &[Vec<f32>], target: usize) -> Vec<Vec<f32>> {
    let n = rows.len();
    assert!(n > 0 && target > 0);
    if n == target {
        return rows.to_vec();
    }
    (0..target)
        .map(|t| {
            if n == 1 {
                return rows[0].clone();
            }
            let pos = t as f64 * (n - 1) as f64 / (target - 1) as f64;
            let i = pos.floor() as usize;
            let frac = (pos - i as f64) as f32;
            if i + 1 >= n {
                return rows[n - 1].clone();
            }
            rows[i]
                .iter()
                .zip(&rows[i + 1])
                .map(|(a, b)| a * (1.0 - frac) + b * frac)
                .collect()
        })
        .collect()
}

/// 640x128 log-power CQT of a 10-second 32 kHz segment.
pub fn cqt_spectrogram(pcm: &PcmBuffer, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    let kernels = CqtKernels::build(cfg);
    cqt_spectrogram_with(&kernels, pcm, cfg)
}

/// As [`cqt_spectrogram`] with prebuilt kernels (batch extraction).
pub fn cqt_spectrogram_with(
    kernels: &CqtKernels,
    pcm: &PcmBuffer,
    cfg: &DspConfig,
) -> Result<Spectrogram, DspError> {
    let target_frames = check_input(pcm, cfg)?;
    let internal_frames = (pcm.samples.len() / cfg.cqt_internal_hop).max(1);
    let power = kernels.power_frames(&pcm.samples, internal_frames, cfg.cqt_internal_hop);
    let rows = resample_time(&power, target_frames);

    let mut values = vec![0.0f32; target_frames * SPEC_BINS];
    for (t, row) in rows.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            values[t * SPEC_BINS + b] = (p + cfg.log_eps).ln();
        }
    }
    Ok(Spectrogram {
        kind: SpecKind::Cqt,
        values,
        frames: target_frames,
        bins: SPEC_BINS,
        hop_samples: cfg.hop,
        sample_rate: cfg.sample_rate,
    })
}
