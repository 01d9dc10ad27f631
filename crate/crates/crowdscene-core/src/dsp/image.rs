//! Frame-image loading for the visual stream: PNG and binary PPM (P6)
//! decoding, bilinear resize to 128x128x3 patches with values in [0, 1].

use std::fs;
use std::io::BufReader;
use std::path::Path;

use super::{DspError, Patch, PatchSource, PATCH_SIDE};

/// Decoded RGB image, channel-major `[3][height][width]`, values in [0, 1].
#[derive(Debug, Clone)]
pub struct FrameImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f32>,
}

impl FrameImage {
    pub fn at(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.rgb[(channel * self.height + y) * self.width + x]
    }
}

pub fn load_frame(path: &Path) -> Result<FrameImage, DspError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => load_png(path),
        Some("ppm") => load_ppm(path),
        other => Err(DspError::BadImage(format!(
            "{}: unsupported extension {other:?} (png or ppm)",
            path.display()
        ))),
    }
}

fn load_png(path: &Path) -> Result<FrameImage, DspError> {
    let err = |e: String| DspError::BadImage(format!("{}: {e}", path.display()));
    let file = fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| err("image too large".into()))?];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| err(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(err(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        other => return Err(err(format!("unsupported color type {other:?}"))),
    };
    let pixels = &buf[..w * h * stride];
    let mut rgb = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let p = (y * w + x) * stride;
            for c in 0..3 {
                let v = match info.color_type {
                    png::ColorType::Grayscale => pixels[p],
                    _ => pixels[p + c],
                };
                rgb[(c * h + y) * w + x] = f32::from(v) / 255.0;
            }
        }
    }
    Ok(FrameImage {
        width: w,
        height: h,
        rgb,
    })
}

fn load_ppm(path: &Path) -> Result<FrameImage, DspError> {
    let err = |e: String| DspError::BadImage(format!("{}: {e}", path.display()));
    let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
    let mut pos = 0usize;
    let mut token = || -> Result<String, DspError> {
        // skip whitespace and comments
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(DspError::BadImage("truncated ppm header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err(err("not a binary P6 ppm".into()));
    }
    let w: usize = token()?.parse().map_err(|_| err("bad width".into()))?;
    let h: usize = token()?.parse().map_err(|_| err("bad height".into()))?;
    let maxval: usize = token()?.parse().map_err(|_| err("bad maxval".into()))?;
    if maxval != 255 {
        return Err(err(format!("unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(err("truncated pixel data".into()));
    }
    let pixels = &bytes[pos..pos + need];
    let mut rgb = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let p = (y * w + x) * 3;
            for c in 0..3 {
                rgb[(c * h + y) * w + x] = f32::from(pixels[p + c]) / 255.0;
            }
        }
    }
    Ok(FrameImage {
        width: w,
        height: h,
        rgb,
    })
}

/// Writes an RGB image as binary PPM. `rgb` is channel-major `[3][h][w]`
/// with values in [0, 1].
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[f32]) -> std::io::Result<()> {
    assert_eq!(rgb.len(), 3 * width * height);
    let mut out = Vec::with_capacity(20 + 3 * width * height);
    out.extend_from_slice(format!("P6\n{width} {height}\n255\n").as_bytes());
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let v = (rgb[(c * height + y) * width + x].clamp(0.0, 1.0) * 255.0).round();
                out.push(v as u8);
            }
        }
    }
    fs::write(path, out)
}

/// Bilinear resize to the classifier input size.
pub fn resize_to_patch(frame: &FrameImage, source: PatchSource) -> Patch {
    let side = PATCH_SIDE;
    let mut values = vec![0.0f32; 3 * side * side];
    for c in 0..3 {
        for y in 0..side {
            for x in 0..side {
                // map output pixel centers into source pixel centers
                let sy = (y as f32 + 0.5) * frame.height as f32 / side as f32 - 0.5;
                let sx = (x as f32 + 0.5) * frame.width as f32 / side as f32 - 0.5;
                let y0 = sy.floor().clamp(0.0, (frame.height - 1) as f32) as usize;
                let x0 = sx.floor().clamp(0.0, (frame.width - 1) as f32) as usize;
                let y1 = (y0 + 1).min(frame.height - 1);
                let x1 = (x0 + 1).min(frame.width - 1);
                let fy = (sy - y0 as f32).clamp(0.0, 1.0);
                let fx = (sx - x0 as f32).clamp(0.0, 1.0);
                let v = frame.at(c, y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + frame.at(c, y0, x1) * (1.0 - fy) * fx
                    + frame.at(c, y1, x0) * fy * (1.0 - fx)
                    + frame.at(c, y1, x1) * fy * fx;
                values[(c * side + y) * side + x] = v;
            }
        }
    }
    Patch::new(values, 3, source)
}

/// Loads every PNG/PPM under `frames_dir` in lexicographic order as
/// 128x128x3 patches.
pub fn frames_to_patches(frames_dir: &Path, segment_id: &str) -> Result<Vec<Patch>, DspError> {
    let mut paths: Vec<_> = fs::read_dir(frames_dir)
        .map_err(|e| DspError::BadImage(format!("{}: {e}", frames_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let frame = load_frame(path)?;
            Ok(resize_to_patch(
                &frame,
                PatchSource {
                    segment_id: segment_id.to_string(),
                    patch_index: i,
                },
            ))
        })
        .collect()
}
