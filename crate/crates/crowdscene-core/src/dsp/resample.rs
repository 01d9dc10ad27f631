//! Band-limited sample-rate conversion with a windowed-sinc kernel.

use super::{DspError, PcmBuffer};

/// Half-width of the sinc kernel in source samples.
const KERNEL_HALF_WIDTH: usize = 32;

/// Resamples to `target_rate` with windowed-sinc interpolation.
///
/// Output length is `round(len * target / source)`. When the rates already
/// match the input is returned bit-identical. Kernel weights are renormalized
/// per output sample so a constant signal stays constant, including at the
/// edges.
pub fn resample(pcm: &PcmBuffer, target_rate: u32) -> Result<PcmBuffer, DspError> {
    assert!(target_rate > 0, "target_rate must be positive");
    if pcm.samples.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if pcm.sample_rate == target_rate {
        return Ok(pcm.clone());
    }

    let ratio = f64::from(target_rate) / f64::from(pcm.sample_rate);
    let out_len = ((pcm.samples.len() as f64) * ratio).round() as usize;
    // Anti-alias cutoff: full band when upsampling, target Nyquist when
    // downsampling.
    let cutoff = ratio.min(1.0);
    let half = KERNEL_HALF_WIDTH as isize;
    let n = pcm.samples.len() as isize;

    let samples = (0..out_len)
        .map(|i| {
            let t_src = i as f64 / ratio;
            let center = t_src.floor() as isize;
            let mut acc = 0.0f64;
            let mut wsum = 0.0f64;
            for m in (center - half + 1)..=(center + half) {
                if m < 0 || m >= n {
                    continue;
                }
                let d = t_src - m as f64;
                let w = sinc(cutoff * d) * hann_at(d, half as f64);
                acc += w * f64::from(pcm.samples[m as usize]);
                wsum += w;
            }
            if wsum.abs() > 1e-12 {
                (acc / wsum) as f32
            } else {
                0.0
            }
        })
        .collect();

    Ok(PcmBuffer {
        samples,
        sample_rate: target_rate,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn hann_at(offset: f64, half: f64) -> f64 {
    if offset.abs() >= half {
        0.0
    } else {
        0.5 + 0.5 * (std::f64::consts::PI * offset / half).cos()
    }
}
