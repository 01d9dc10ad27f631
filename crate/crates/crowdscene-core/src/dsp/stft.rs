//! Shared short-time analysis: Hann windowing and per-frame power spectra.
//!
//! Frames are centered at `t * hop`; samples outside the signal are zero.

use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;

pub fn hann(len: usize) -> Vec<f32> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f32::consts::PI * n as f32 / len as f32).cos())
        .collect()
}

/// Computes `frames` power spectra (bins 0..=fft_len/2) of a real signal.
/// Frame `t` is the Hann-windowed slice of `window_len` samples centered at
/// `t * hop`, zero-padded to `fft_len`.
pub fn power_frames(
    signal: &[f32],
    frames: usize,
    window_len: usize,
    fft_len: usize,
    hop: usize,
) -> Vec<Vec<f32>> {
    assert!(fft_len >= window_len);
    let window = hann(window_len);
    let fft = FftPlanner::<f32>::new().plan_fft_forward(fft_len);
    let half = window_len / 2;
    let out_bins = fft_len / 2 + 1;

    let mut buf = vec![Complex32::new(0.0, 0.0); fft_len];
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let center = t * hop;
        buf.fill(Complex32::new(0.0, 0.0));
        for (n, w) in window.iter().enumerate() {
            let idx = center as isize - half as isize + n as isize;
            if idx >= 0 && (idx as usize) < signal.len() {
                buf[n] = Complex32::new(signal[idx as usize] * w, 0.0);
            }
        }
        fft.process(&mut buf);
        out.push(buf[..out_bins].iter().map(|c| c.norm_sqr()).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_endpoints_and_symmetry() {
        let w = hann(8);
        assert!(w[0].abs() < 1e-7);
        // periodic Hann: w[n] == w[len - n]
        for n in 1..8 {
            assert!((w[n] - w[8 - n]).abs() < 1e-6);
        }
    }

    #[test]
    fn tone_peak_lands_on_expected_fft_bin() {
        let rate = 32_000;
        let freq = 1000.0f32;
        let n = 32_000;
        let signal: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f32::consts::PI * freq * i as f32 / rate as f32).sin())
            .collect();
        let frames = power_frames(&signal, 4, 2560, 4096, 500);
        // 1000 Hz at 32 kHz with a 4096 FFT -> bin 128.
        for frame in &frames {
            let argmax = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!((argmax as i64 - 128).abs() <= 1, "argmax {argmax}");
        }
    }
}
