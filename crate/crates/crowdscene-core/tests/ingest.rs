//! Media ingestion through a stand-in decoder: a shell command that copies
//! pre-rendered 10-second WAV "parts" of the source, failing where the
//! source has no more material - the same success/failure surface a real
//! decoder invocation exposes.

use std::path::Path;

use crowdscene_core::audio::write_wav_mono;
use crowdscene_core::manifest::{ingest_media, IngestError};

/// Renders `{input}.part{start}` files: one full 10 s WAV per complete
/// segment and optionally a short trailing one.
fn prepare_video(dir: &Path, name: &str, seconds: f64) -> std::path::PathBuf {
    let video = dir.join(name);
    std::fs::write(&video, b"fake container").unwrap();
    let rate = 32_000u32;
    let mut start = 0.0;
    while start < seconds {
        let len = (seconds - start).min(10.0);
        let samples = vec![0.25f32; (len * f64::from(rate)) as usize];
        write_wav_mono(
            dir.join(format!("{name}.part{}", start as u64)),
            &samples,
            rate,
        )
        .unwrap();
        start += 10.0;
    }
    video
}

const DECODER: &str = "cp {input}.part{start} {output}";

#[test]
fn video_of_29s_yields_two_segments() {
    let dir = tempfile::tempdir().unwrap();
    let video = prepare_video(dir.path(), "vid29", 29.0);
    let out = dir.path().join("segments");
    let report = ingest_media(&video, &out, DECODER, None).unwrap();
    assert_eq!(report.segments.len(), 2);
    assert!(report.warnings.is_empty());
    for (i, seg) in report.segments.iter().enumerate() {
        assert_eq!(seg.segment_index as usize, i);
        assert_eq!(seg.start_s, 10.0 * i as f64);
        assert_eq!(seg.duration_s, 10.0);
        assert!(seg.audio_path.exists());
    }
    // the short trailing part must not survive as a segment file
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2);
}

#[test]
fn video_of_exactly_10s_yields_one_segment() {
    let dir = tempfile::tempdir().unwrap();
    let video = prepare_video(dir.path(), "vid10", 10.0);
    let report = ingest_media(&video, &dir.path().join("segments"), DECODER, None).unwrap();
    assert_eq!(report.segments.len(), 1);
}

#[test]
fn short_video_yields_zero_segments_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let video = prepare_video(dir.path(), "vid7", 7.0);
    let report = ingest_media(&video, &dir.path().join("segments"), DECODER, None).unwrap();
    assert!(report.segments.is_empty());
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn unreadable_video_is_a_decoder_failure() {
    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("missing.mp4");
    let result = ingest_media(&video, &dir.path().join("segments"), DECODER, None);
    assert!(matches!(result, Err(IngestError::DecoderFailure { .. })));
}

#[test]
fn segment_count_is_floor_of_duration_over_ten() {
    let dir = tempfile::tempdir().unwrap();
    for (seconds, expected) in [(10.0, 1usize), (19.9, 1), (20.0, 2), (45.0, 4)] {
        let name = format!("v{}", (seconds * 10.0) as u64);
        let video = prepare_video(dir.path(), &name, seconds);
        let out = dir.path().join(format!("seg_{name}"));
        let report = ingest_media(&video, &out, DECODER, None).unwrap();
        assert_eq!(
            report.segments.len(),
            expected,
            "{seconds} s -> {expected} segments"
        );
    }
}

#[test]
fn frame_template_populates_frames_dir() {
    let dir = tempfile::tempdir().unwrap();
    let video = prepare_video(dir.path(), "vidf", 10.0);
    let frame_cmd = "touch {outdir}/frame_00.ppm";
    let report = ingest_media(
        &video,
        &dir.path().join("segments"),
        DECODER,
        Some(frame_cmd),
    )
    .unwrap();
    assert_eq!(report.segments.len(), 1);
    let frames_dir = report.segments[0].frames_dir.as_ref().unwrap();
    assert!(frames_dir.join("frame_00.ppm").exists());
}
