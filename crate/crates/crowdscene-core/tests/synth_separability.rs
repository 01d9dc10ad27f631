//! Separability oracle for the synthetic corpus: a nearest-centroid
//! classifier over per-bin mean log-mel energy must reach at least 95% on
//! the synthetic test split. The pipeline's classifier can only be
//! evaluated end-to-end if the corpus itself is this separable.

use crowdscene_core::audio::read_wav_mono;
use crowdscene_core::dsp::{mel_spectrogram, DspConfig, SPEC_BINS};
use crowdscene_core::manifest::{SceneLabel, Split};
use crowdscene_core::synth::{generate_corpus, SynthSpec};
use crowdscene_core::CLASS_COUNT;

fn mel_energy_profile(path: &std::path::Path, cfg: &DspConfig) -> Vec<f64> {
    let pcm = read_wav_mono(path).unwrap();
    let spec = mel_spectrogram(&pcm, cfg).unwrap();
    let mut profile = vec![0.0f64; SPEC_BINS];
    for t in 0..spec.frames {
        for (b, p) in profile.iter_mut().enumerate() {
            *p += f64::from(spec.at(t, b));
        }
    }
    for p in &mut profile {
        *p /= spec.frames as f64;
    }
    profile
}

#[test]
fn nearest_centroid_on_mel_profiles_reaches_95_percent() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        train_per_class: 8,
        test_per_class: 4,
        rng_seed: 123,
        emit_frames: false,
        frames_per_segment: 0,
    };
    let manifest = generate_corpus(&spec, dir.path()).unwrap();
    let cfg = DspConfig::default();

    let mut centroids = vec![vec![0.0f64; SPEC_BINS]; CLASS_COUNT];
    let mut counts = [0usize; CLASS_COUNT];
    for r in manifest.split_records(Split::Train) {
        let profile = mel_energy_profile(&r.audio_path, &cfg);
        let c = r.label.code();
        counts[c] += 1;
        for (acc, v) in centroids[c].iter_mut().zip(&profile) {
            *acc += v;
        }
    }
    for (centroid, &count) in centroids.iter_mut().zip(&counts) {
        assert!(count > 0);
        for v in centroid.iter_mut() {
            *v /= count as f64;
        }
    }

    let mut correct = 0usize;
    let mut total = 0usize;
    for r in manifest.split_records(Split::Test) {
        let profile = mel_energy_profile(&r.audio_path, &cfg);
        let nearest = (0..CLASS_COUNT)
            .min_by(|&a, &b| {
                let da: f64 = centroids[a]
                    .iter()
                    .zip(&profile)
                    .map(|(c, p)| (c - p) * (c - p))
                    .sum();
                let db: f64 = centroids[b]
                    .iter()
                    .zip(&profile)
                    .map(|(c, p)| (c - p) * (c - p))
                    .sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        total += 1;
        if nearest == r.label.code() {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(
        accuracy >= 0.95,
        "nearest-centroid accuracy {accuracy:.3} below 0.95 ({correct}/{total})"
    );
    assert_eq!(SceneLabel::ALL.len(), CLASS_COUNT);
}
