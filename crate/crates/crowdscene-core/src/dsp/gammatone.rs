//! Gammatone spectrogram: 128 ERB-spaced 4th-order all-pole gammatone
//! channels (two identical biquads per channel), mean-square energy per hop,
//! log compressed.

use rayon::prelude::*;

use super::{check_input, DspConfig, DspError, PcmBuffer, SpecKind, Spectrogram, SPEC_BINS};

/// Glasberg-Moore equivalent rectangular bandwidth in Hz.
pub fn erb_bandwidth_hz(freq_hz: f64) -> f64 {
    24.7 * (4.37 * freq_hz / 1000.0 + 1.0)
}

/// ERB-rate scale (number of ERBs below `freq_hz`).
fn erb_rate(freq_hz: f64) -> f64 {
    21.4 * (0.00437 * freq_hz + 1.0).log10()
}

fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 0.00437
}

/// Channel center frequencies, uniformly spaced on the ERB-rate scale.
pub fn gammatone_center_freqs(channels: usize, fmin_hz: f64, fmax_hz: f64) -> Vec<f64> {
    let lo = erb_rate(fmin_hz);
    let hi = erb_rate(fmax_hz);
    (0..channels)
        .map(|c| erb_rate_to_hz(lo + (hi - lo) * c as f64 / (channels - 1) as f64))
        .collect()
}

/// All-pole biquad, direct form II transposed.
#[derive(Clone, Copy)]
struct Biquad {
    b0: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn process(&self, input: &[f32], output: &mut [f32]) {
        let (mut z1, mut z2) = (0.0f64, 0.0f64);
        for (x, y) in input.iter().zip(output.iter_mut()) {
            let v = self.b0 * f64::from(*x) + z1;
            z1 = -self.a1 * v + z2;
            z2 = -self.a2 * v;
            *y = v as f32;
        }
    }
}

/// Two identical all-pole sections realizing one 4th-order gammatone channel
/// with unity gain at its center frequency.
fn design_channel(fc: f64, fs: f64) -> Biquad {
    let theta = 2.0 * std::f64::consts::PI * fc / fs;
    let bw = 1.019 * erb_bandwidth_hz(fc);
    let r = (-2.0 * std::f64::consts::PI * bw / fs).exp();
    let a1 = -2.0 * r * theta.cos();
    let a2 = r * r;
    // |1 + a1 e^{-j theta} + a2 e^{-j 2 theta}| so each section is unity at fc.
    let re = 1.0 + a1 * theta.cos() + a2 * (2.0 * theta).cos();
    let im = -a1 * theta.sin() - a2 * (2.0 * theta).sin();
    let b0 = (re * re + im * im).sqrt();
    Biquad { b0, a1, a2 }
}

/// Precomputed filterbank, reusable across segments.
pub struct GammatoneBank {
    sections: Vec<Biquad>,
    pub center_freqs: Vec<f64>,
}

impl GammatoneBank {
    pub fn build(cfg: &DspConfig) -> Self {
        let center_freqs = gammatone_center_freqs(
            SPEC_BINS,
            f64::from(cfg.gam_fmin_hz),
            f64::from(cfg.gam_fmax_hz),
        );
        let sections = center_freqs
            .iter()
            .map(|&fc| design_channel(fc, f64::from(cfg.sample_rate)))
            .collect();
        Self {
            sections,
            center_freqs,
        }
    }
}

/// 640x128 log-energy gammatone spectrogram of a 10-second 32 kHz segment.
pub fn gam_spectrogram(pcm: &PcmBuffer, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    let bank = GammatoneBank::build(cfg);
    gam_spectrogram_with(&bank, pcm, cfg)
}

/// As [`gam_spectrogram`] with a prebuilt bank (batch extraction).
pub fn gam_spectrogram_with(
    bank: &GammatoneBank,
    pcm: &PcmBuffer,
    cfg: &DspConfig,
) -> Result<Spectrogram, DspError> {
    let frames = check_input(pcm, cfg)?;
    let hop = cfg.hop;

    // One channel per task; each channel is sequential so results do not
    // depend on the thread count.
    let columns: Vec<Vec<f32>> = bank
        .sections
        .par_iter()
        .map(|section| {
            let mut filtered = vec![0.0f32; pcm.samples.len()];
            let mut tmp = vec![0.0f32; pcm.samples.len()];
            section.process(&pcm.samples, &mut tmp);
            section.process(&tmp, &mut filtered);
            (0..frames)
                .map(|t| {
                    let block = &filtered[t * hop..(t + 1) * hop];
                    let energy =
                        block.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>()
                            / hop as f64;
                    (energy as f32 + cfg.log_eps).ln()
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0f32; frames * SPEC_BINS];
    for (c, column) in columns.iter().enumerate() {
        for (t, &v) in column.iter().enumerate() {
            values[t * SPEC_BINS + c] = v;
        }
    }
    Ok(Spectrogram {
        kind: SpecKind::Gam,
        values,
        frames,
        bins: SPEC_BINS,
        hop_samples: hop,
        sample_rate: cfg.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_signals::{silence, sine};
    use super::*;
    use crate::dsp::{SAMPLE_RATE, SPEC_FRAMES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_geometry_is_640_by_128() {
        let pcm = sine(1000.0, 10.0, SAMPLE_RATE);
        let spec = gam_spectrogram(&pcm, &DspConfig::default()).unwrap();
        assert_eq!(spec.frames, SPEC_FRAMES);
        assert_eq!(spec.bins, SPEC_BINS);
        assert!(spec.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silence_is_a_uniform_floor() {
        let cfg = DspConfig::default();
        let spec = gam_spectrogram(&silence(10.0, SAMPLE_RATE), &cfg).unwrap();
        let floor = cfg.log_eps.ln();
        assert!(spec.values.iter().all(|&v| v == floor));
    }

    #[test]
    fn center_freqs_are_monotonic_and_span_range() {
        let freqs = gammatone_center_freqs(128, 50.0, 16000.0);
        assert_eq!(freqs.len(), 128);
        assert!((freqs[0] - 50.0).abs() < 1e-6);
        assert!((freqs[127] - 16000.0).abs() < 1e-3);
        assert!(freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tone_energy_concentrates_near_matching_channel() {
        let cfg = DspConfig::default();
        let freqs = gammatone_center_freqs(128, 50.0, 16000.0);
        let target = 2000.0;
        let expected = freqs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target).abs().partial_cmp(&(b.1 - target).abs()).unwrap()
            })
            .unwrap()
            .0;
        let spec = gam_spectrogram(&sine(target as f32, 10.0, SAMPLE_RATE), &cfg).unwrap();
        let mid = spec.frames / 2;
        let argmax = spec.frame_argmax(mid);
        assert!(
            (argmax as i64 - expected as i64).abs() <= 2,
            "argmax {argmax}, expected near {expected}"
        );
    }

    /// Monte-Carlo oracle with a fixed seed: with unity peak gain per
    /// channel, white-noise energy captured by a channel grows with its
    /// bandwidth, so group-averaged channel energies must increase with
    /// channel index (ERB bandwidth is monotone in center frequency).
    #[test]
    fn white_noise_energy_tracks_bandwidth_ordering() {
        let cfg = DspConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<f32> = (0..320_000)
            .map(|_| rng.random_range(-0.5f32..0.5))
            .collect();
        let pcm = PcmBuffer::new(samples, SAMPLE_RATE);
        let spec = gam_spectrogram(&pcm, &cfg).unwrap();

        // Mean energy (not log) per channel over all frames, then averaged
        // over groups of 16 adjacent channels to damp Monte-Carlo noise.
        let mut channel_energy = vec![0.0f64; SPEC_BINS];
        for t in 0..spec.frames {
            for (c, e) in channel_energy.iter_mut().enumerate() {
                *e += f64::from(spec.at(t, c)).exp();
            }
        }
        let groups: Vec<f64> = channel_energy
            .chunks(16)
            .map(|g| g.iter().sum::<f64>() / g.len() as f64)
            .collect();
        for w in groups.windows(2) {
            assert!(
                w[1] > w[0],
                "group energies not increasing: {groups:?}"
            );
        }
    }

    #[test]
    fn deterministic_for_identical_input() {
        let cfg = DspConfig::default();
        let pcm = sine(3000.0, 10.0, SAMPLE_RATE);
        let a = gam_spectrogram(&pcm, &cfg).unwrap();
        let b = gam_spectrogram(&pcm, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }
}
