//! Headless HTTP classification service.
//!
//! `GET /health` reports the loaded frameworks and fusion scheme;
//! `POST /classify` accepts a WAV upload (multipart/form-data or a raw
//! `audio/wav` body), splits it into consecutive 10-second segments
//! (trailing remainder dropped) and returns per-segment fused
//! probabilities. Requests are stateless against a shared read-only model
//! snapshot; identical uploads produce identical responses.
//!
//! Status codes: 400 undecodable audio, 404 unknown path, 405 wrong method,
//! 413 over the size limit, 422 shorter than one segment, 500 inference
//! failure.

use std::io::Read;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use tiny_http::{Header, Method, Response, Server};

use crowdscene_core::audio::read_wav_mono_from;
use crowdscene_core::dsp::{resample, DspConfig, FeatureKind, PcmBuffer};
use crowdscene_core::features::FeatureExtractor;
use crowdscene_core::fusion::{fuse, FrameworkPredictions, FusionInput, FusionScheme};
use crowdscene_core::manifest::SceneLabel;
use crowdscene_core::nn::checkpoint::{load_checkpoint, Checkpoint};
use crowdscene_core::nn::train::{patches_from_feature, NormStats};
use crowdscene_core::nn::{batch_from_patches, forward_infer, probs_to_vectors};
use crowdscene_core::fusion::aggregate_segment;

pub const DEFAULT_MAX_BODY_MB: usize = 100;

const SEGMENT_SAMPLES: usize = 320_000;

struct LoadedModel {
    name: String,
    checkpoint: Checkpoint,
    extractor: FeatureExtractor,
    norm: NormStats,
}

/// Immutable service state shared across worker threads.
pub struct ServeState {
    models: Vec<LoadedModel>,
    scheme: FusionScheme,
    max_body_bytes: usize,
    dsp: DspConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("no checkpoints supplied")]
    NoModels,
    #[error("{path}: {msg}")]
    Model { path: String, msg: String },
    #[error("bind failed: {0}")]
    Bind(String),
}

impl ServeState {
    /// Loads checkpoints and prepares one frontend per model. The audio
    /// service rejects frame-feature checkpoints (the visual path runs
    /// through the CLI with frame features).
    pub fn load(
        checkpoints: &[impl AsRef<Path>],
        scheme: FusionScheme,
        max_body_mb: usize,
    ) -> Result<Self, ServeError> {
        if checkpoints.is_empty() {
            return Err(ServeError::NoModels);
        }
        let dsp = DspConfig::default();
        let mut models = Vec::new();
        for path in checkpoints {
            let path = path.as_ref();
            let display = path.display().to_string();
            let checkpoint = load_checkpoint(path).map_err(|e| ServeError::Model {
                path: display.clone(),
                msg: e.to_string(),
            })?;
            if checkpoint.meta.kind == FeatureKind::Frames {
                return Err(ServeError::Model {
                    path: display,
                    msg: "frame-feature checkpoints are not servable (audio-only service)".into(),
                });
            }
            let norm = checkpoint.meta.norm.clone().ok_or_else(|| ServeError::Model {
                path: display.clone(),
                msg: "checkpoint carries no normalization statistics".into(),
            })?;
            let kind = checkpoint.meta.kind;
            models.push(LoadedModel {
                name: format!("{}-vgg15", kind.name()),
                checkpoint,
                extractor: FeatureExtractor::new(kind, dsp.clone()),
                norm,
            });
        }
        Ok(Self {
            models,
            scheme,
            max_body_bytes: max_body_mb * 1024 * 1024,
            dsp,
        })
    }

    pub fn framework_names(&self) -> Vec<String> {
        self.models.iter().map(|m| m.name.clone()).collect()
    }
}

#[derive(Serialize)]
struct ModelInfo {
    frameworks: Vec<String>,
    fusion: String,
}

#[derive(Serialize)]
struct HealthResponse {
    status: &'static str,
    model: ModelInfo,
}

#[derive(Serialize)]
struct SegmentEntry {
    segment_index: usize,
    probs: std::collections::BTreeMap<String, f64>,
    predicted: String,
}

#[derive(Serialize)]
struct ClassifyResponse {
    model: ModelInfo,
    segments: Vec<SegmentEntry>,
}

#[derive(Serialize)]
struct ErrorResponse {
    error: String,
}

/// A bound, running service. Keeps its worker threads alive for the process
/// lifetime (the CLI blocks on it; tests hold the handle).
pub struct RunningService {
    pub addr: SocketAddr,
    _server: Arc<Server>,
}

/// Binds `addr` (port 0 picks a free port) and serves requests on two
/// worker threads.
pub fn run_server(state: ServeState, addr: &str) -> Result<RunningService, ServeError> {
    let server = Arc::new(Server::http(addr).map_err(|e| ServeError::Bind(e.to_string()))?);
    let local = server
        .server_addr()
        .to_ip()
        .expect("http listener has an ip address");
    let state = Arc::new(state);
    for _ in 0..2 {
        let server = Arc::clone(&server);
        let state = Arc::clone(&state);
        std::thread::spawn(move || {
            while let Ok(request) = server.recv() {
                handle(&state, request);
            }
        });
    }
    Ok(RunningService {
        addr: local,
        _server: server,
    })
}

fn json_response<T: Serialize>(status: u16, body: &T) -> Response<std::io::Cursor<Vec<u8>>> {
    let json = serde_json::to_vec(body).unwrap_or_else(|_| b"{}".to_vec());
    Response::from_data(json)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").expect("static header"))
}

fn error_response(status: u16, msg: impl Into<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(
        status,
        &ErrorResponse {
            error: msg.into(),
        },
    )
}

fn handle(state: &ServeState, mut request: tiny_http::Request) {
    let response = match (request.method().clone(), request.url().to_string().as_str()) {
        (Method::Get, "/health") => json_response(
            200,
            &HealthResponse {
                status: "ok",
                model: ModelInfo {
                    frameworks: state.framework_names(),
                    fusion: state.scheme.name().to_string(),
                },
            },
        ),
        (Method::Post, "/classify") => classify(state, &mut request),
        (Method::Get, "/classify") | (Method::Post, "/health") => {
            error_response(405, "method not allowed")
        }
        _ => error_response(404, "unknown path"),
    };
    let _ = request.respond(response);
}

fn classify(state: &ServeState, request: &mut tiny_http::Request) -> Response<std::io::Cursor<Vec<u8>>> {
    if let Some(len) = request.body_length() {
        if len > state.max_body_bytes {
            return error_response(413, format!("body of {len} bytes exceeds limit"));
        }
    }
    let mut body = Vec::new();
    {
        let reader = request.as_reader();
        let mut limited = reader.take(state.max_body_bytes as u64 + 1);
        if limited.read_to_end(&mut body).is_err() {
            return error_response(400, "failed to read request body");
        }
    }
    if body.len() > state.max_body_bytes {
        return error_response(413, "body exceeds limit");
    }

    let content_type = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Content-Type"))
        .map(|h| h.value.as_str().to_string())
        .unwrap_or_default();
    let wav_bytes = if content_type.starts_with("multipart/form-data") {
        match extract_multipart_file(&body, &content_type) {
            Some(part) => part,
            None => return error_response(400, "no file part in multipart body"),
        }
    } else {
        body
    };

    let pcm = match read_wav_mono_from(std::io::Cursor::new(&wav_bytes)) {
        Ok(pcm) => pcm,
        Err(e) => return error_response(400, format!("undecodable audio: {e}")),
    };
    let pcm = if pcm.sample_rate == state.dsp.sample_rate {
        pcm
    } else {
        match resample(&pcm, state.dsp.sample_rate) {
            Ok(pcm) => pcm,
            Err(e) => return error_response(400, format!("resample failed: {e}")),
        }
    };
    let segment_count = pcm.samples.len() / SEGMENT_SAMPLES;
    if segment_count == 0 {
        return error_response(
            422,
            format!(
                "audio of {:.2} s is shorter than one 10-second segment",
                pcm.duration_seconds()
            ),
        );
    }

    match classify_segments(state, &pcm, segment_count) {
        Ok(segments) => json_response(
            200,
            &ClassifyResponse {
                model: ModelInfo {
                    frameworks: state.framework_names(),
                    fusion: state.scheme.name().to_string(),
                },
                segments,
            },
        ),
        Err(msg) => error_response(500, msg),
    }
}

fn classify_segments(
    state: &ServeState,
    pcm: &PcmBuffer,
    segment_count: usize,
) -> Result<Vec<SegmentEntry>, String> {
    let mut entries = Vec::with_capacity(segment_count);
    for seg in 0..segment_count {
        let slice = &pcm.samples[seg * SEGMENT_SAMPLES..(seg + 1) * SEGMENT_SAMPLES];
        let segment_pcm = PcmBuffer::new(slice.to_vec(), pcm.sample_rate);
        let segment_id = format!("upload#{seg}");

        let mut frameworks = Vec::with_capacity(state.models.len());
        for model in &state.models {
            let mut tensor = model
                .extractor
                .extract_audio(&segment_pcm)
                .map_err(|e| format!("feature extraction failed: {e}"))?;
            model.norm.standardize(model.checkpoint.meta.kind, &mut tensor);
            let patches = patches_from_feature(&tensor, model.checkpoint.meta.kind, &segment_id)
                .map_err(|e| format!("patching failed: {e}"))?;
            let x = batch_from_patches(&patches);
            let probs = forward_infer(&model.checkpoint.params, &x);
            let vectors = probs_to_vectors(&probs);
            let aggregated =
                aggregate_segment(&vectors).map_err(|e| format!("aggregation failed: {e}"))?;
            frameworks.push(FrameworkPredictions {
                name: model.name.clone(),
                predictions: vec![crowdscene_core::fusion::SegmentPrediction::new(
                    segment_id.clone(),
                    aggregated,
                    model.name.clone(),
                )],
            });
        }
        let input = FusionInput::new(frameworks).map_err(|e| e.to_string())?;
        let fused = fuse(&input, state.scheme).map_err(|e| e.to_string())?;
        let prediction = fused.into_iter().next().ok_or("fusion yielded nothing")?;

        let mut probs = std::collections::BTreeMap::new();
        for label in SceneLabel::ALL {
            probs.insert(label.name().to_string(), prediction.prob.get(label));
        }
        entries.push(SegmentEntry {
            segment_index: seg,
            probs,
            predicted: prediction.label.name().to_string(),
        });
    }
    Ok(entries)
}

/// Pulls the first file part out of a multipart/form-data body.
fn extract_multipart_file(body: &[u8], content_type: &str) -> Option<Vec<u8>> {
    let boundary = content_type
        .split(';')
        .map(str::trim)
        .find_map(|p| p.strip_prefix("boundary="))?
        .trim_matches('"');
    let delimiter = format!("--{boundary}");
    let start = find_subsequence(body, delimiter.as_bytes())?;
    let after = &body[start + delimiter.len()..];
    // part headers end at the first blank line
    let header_end = find_subsequence(after, b"\r\n\r\n")?;
    let data = &after[header_end + 4..];
    let close = format!("\r\n--{boundary}");
    let end = find_subsequence(data, close.as_bytes())?;
    Some(data[..end].to_vec())
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}
