//! Shared helpers for integration tests: a bare-bones HTTP/1.1 client and
//! WAV synthesis.
#![allow(dead_code)] // each test binary uses its own subset

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};

/// Sends one HTTP/1.1 request and returns (status, body). Connection: close.
pub fn http_request(
    addr: SocketAddr,
    method: &str,
    path: &str,
    headers: &[(&str, String)],
    body: &[u8],
) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).expect("connect");
    let mut request = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n");
    for (k, v) in headers {
        request.push_str(&format!("{k}: {v}\r\n"));
    }
    request.push_str(&format!("Content-Length: {}\r\n\r\n", body.len()));
    stream.write_all(request.as_bytes()).expect("write head");
    stream.write_all(body).expect("write body");
    stream.flush().expect("flush");

    let mut response = Vec::new();
    stream.read_to_end(&mut response).expect("read response");
    let header_end = response
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .expect("response has headers");
    let head = String::from_utf8_lossy(&response[..header_end]).into_owned();
    let status: u16 = head
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .expect("status code");
    (status, response[header_end + 4..].to_vec())
}

pub fn get(addr: SocketAddr, path: &str) -> (u16, Vec<u8>) {
    http_request(addr, "GET", path, &[], &[])
}

pub fn post_wav(addr: SocketAddr, wav: &[u8]) -> (u16, Vec<u8>) {
    http_request(
        addr,
        "POST",
        "/classify",
        &[("Content-Type", "audio/wav".to_string())],
        wav,
    )
}

pub fn post_multipart_wav(addr: SocketAddr, wav: &[u8]) -> (u16, Vec<u8>) {
    let boundary = "crowdsceneTestBoundary";
    let mut body = Vec::new();
    body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
    body.extend_from_slice(
        b"Content-Disposition: form-data; name=\"file\"; filename=\"u.wav\"\r\n",
    );
    body.extend_from_slice(b"Content-Type: audio/wav\r\n\r\n");
    body.extend_from_slice(wav);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    http_request(
        addr,
        "POST",
        "/classify",
        &[(
            "Content-Type",
            format!("multipart/form-data; boundary={boundary}"),
        )],
        &body,
    )
}

/// In-memory PCM-16 mono WAV of a sine tone.
pub fn sine_wav_bytes(freq: f32, seconds: f32, sample_rate: u32) -> Vec<u8> {
    let n = (seconds * sample_rate as f32).round() as usize;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).expect("wav writer");
        for i in 0..n {
            let v = (2.0 * std::f32::consts::PI * freq * i as f32 / sample_rate as f32).sin() * 0.4;
            writer.write_sample((v * 32767.0) as i16).expect("sample");
        }
        writer.finalize().expect("finalize");
    }
    cursor.into_inner()
}
