//! Service behavior beyond the acceptance contract: health payload,
//! multipart vs raw-body parity, routing, and the multi-model path.

mod common;

use crowdscene_cli::server::{run_server, ServeState};
use crowdscene_core::dsp::FeatureKind;
use crowdscene_core::fusion::FusionScheme;
use crowdscene_core::nn::arch::vgg15;
use crowdscene_core::nn::checkpoint::save_checkpoint;
use crowdscene_core::nn::train::NormStats;
use crowdscene_core::nn::Vgg15Params;

fn write_checkpoint(dir: &std::path::Path, kind: FeatureKind, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("{}-{seed}.cstf", kind.name()));
    let params = Vgg15Params::<f32>::build(vgg15(1), seed);
    let norm = NormStats {
        mean: vec![0.0; 128],
        std: vec![1.0; 128],
    };
    save_checkpoint(&path, &params, kind, Some(&norm), None, None, None).unwrap();
    path
}

#[test]
fn health_reports_frameworks_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_checkpoint(dir.path(), FeatureKind::Mel, 1);
    let b = write_checkpoint(dir.path(), FeatureKind::Gam, 2);
    let state = ServeState::load(&[a, b], FusionScheme::Max, 10).unwrap();
    let service = run_server(state, "127.0.0.1:0").unwrap();

    let (status, body) = common::get(service.addr, "/health");
    assert_eq!(status, 200);
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(json["status"], "ok");
    assert_eq!(json["model"]["fusion"], "max");
    let frameworks = json["model"]["frameworks"].as_array().unwrap();
    assert_eq!(frameworks.len(), 2);
    assert_eq!(frameworks[0], "mel-vgg15");
    assert_eq!(frameworks[1], "gam-vgg15");
}

#[test]
fn multipart_and_raw_body_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_checkpoint(dir.path(), FeatureKind::Mel, 3);
    let state = ServeState::load(&[ckpt], FusionScheme::Mean, 10).unwrap();
    let service = run_server(state, "127.0.0.1:0").unwrap();

    let wav = common::sine_wav_bytes(500.0, 10.0, 32_000);
    let (status_raw, body_raw) = common::post_wav(service.addr, &wav);
    let (status_mp, body_mp) = common::post_multipart_wav(service.addr, &wav);
    assert_eq!(status_raw, 200);
    assert_eq!(status_mp, 200);
    assert_eq!(body_raw, body_mp);
}

#[test]
fn uploads_at_other_rates_are_resampled() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_checkpoint(dir.path(), FeatureKind::Mel, 4);
    let state = ServeState::load(&[ckpt], FusionScheme::Mean, 10).unwrap();
    let service = run_server(state, "127.0.0.1:0").unwrap();

    // 20 s at 44.1 kHz still yields two 10-second segments after resampling
    let wav = common::sine_wav_bytes(500.0, 20.0, 44_100);
    let (status, body) = common::post_wav(service.addr, &wav);
    assert_eq!(status, 200, "{}", String::from_utf8_lossy(&body));
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(json["segments"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_paths_and_methods_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_checkpoint(dir.path(), FeatureKind::Mel, 5);
    let state = ServeState::load(&[ckpt], FusionScheme::Prod, 10).unwrap();
    let service = run_server(state, "127.0.0.1:0").unwrap();

    let (status, _) = common::get(service.addr, "/nope");
    assert_eq!(status, 404);
    let (status, _) = common::get(service.addr, "/classify");
    assert_eq!(status, 405);
    let (status, _) = common::http_request(service.addr, "POST", "/health", &[], b"");
    assert_eq!(status, 405);
}

#[test]
fn frames_checkpoints_are_not_servable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frames.cstf");
    let params = Vgg15Params::<f32>::build(vgg15(3), 0);
    let norm = NormStats {
        mean: vec![0.0; 3],
        std: vec![1.0; 3],
    };
    save_checkpoint(&path, &params, FeatureKind::Frames, Some(&norm), None, None, None).unwrap();
    assert!(ServeState::load(&[path], FusionScheme::Prod, 10).is_err());
}

#[test]
fn concurrent_identical_uploads_get_identical_answers() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_checkpoint(dir.path(), FeatureKind::Mel, 6);
    let state = ServeState::load(&[ckpt], FusionScheme::Prod, 10).unwrap();
    let service = run_server(state, "127.0.0.1:0").unwrap();
    let wav = std::sync::Arc::new(common::sine_wav_bytes(750.0, 10.0, 32_000));

    let handles: Vec<_> = (0..4)
        .map(|_| {
            let wav = std::sync::Arc::clone(&wav);
            let addr = service.addr;
            std::thread::spawn(move || common::post_wav(addr, &wav))
        })
        .collect();
    let results: Vec<(u16, Vec<u8>)> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (status, body) in &results {
        assert_eq!(*status, 200);
        assert_eq!(body, &results[0].1);
    }
}
