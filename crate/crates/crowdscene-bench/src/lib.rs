//! Benchmark-only crate; see `benches/pipeline.rs`.
//!
//! Shared input builders live here so benchmarks stay terse.

use crowdscene_core::dsp::PcmBuffer;

/// Ten seconds of a deterministic multi-tone test signal at 32 kHz.
pub fn bench_signal() -> PcmBuffer {
    let rate = 32_000u32;
    let n = 10 * rate as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f32 / rate as f32;
            0.3 * (2.0 * std::f32::consts::PI * 440.0 * t).sin()
                + 0.2 * (2.0 * std::f32::consts::PI * 2375.0 * t).sin()
                + 0.1 * (2.0 * std::f32::consts::PI * 7900.0 * t).sin()
        })
        .collect();
    PcmBuffer::new(samples, rate)
}
