//! Minimal PNG bar-chart rendering for per-class accuracies. No plotting
//! dependency: bars, axis and a 5x7 bitmap font on an RGB canvas.

use std::path::Path;

use crowdscene_core::manifest::SceneLabel;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// Rows of 5-bit glyph bitmaps, MSB left.
fn glyph(c: char) -> [u8; GLYPH_H] {
    match c.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '-' => [0x00, 0x00, 0x00, 0x0E, 0x00, 0x00, 0x00],
        _ => [0x00; GLYPH_H],
    }
}

struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<u8>, // interleaved RGB
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![250u8; width * height * 3],
        }
    }

    fn fill_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize, rgb: [u8; 3]) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                let i = (y * self.width + x) * 3;
                self.pixels[i..i + 3].copy_from_slice(&rgb);
            }
        }
    }

    fn text(&mut self, x0: usize, y0: usize, s: &str, rgb: [u8; 3]) {
        let mut x = x0;
        for c in s.chars() {
            let g = glyph(c);
            for (row, bits) in g.iter().enumerate() {
                for col in 0..GLYPH_W {
                    if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                        self.fill_rect(x + col, y0 + row, 1, 1, rgb);
                    }
                }
            }
            x += GLYPH_W + 1;
        }
    }
}

const BAR_COLORS: [[u8; 3]; 5] = [
    [204, 54, 46],
    [120, 120, 126],
    [222, 170, 22],
    [134, 66, 176],
    [46, 148, 72],
];

/// Renders per-class accuracies (0..=1 each) as a labeled bar chart PNG.
pub fn write_accuracy_chart(
    path: &Path,
    per_class_accuracy: &[f64; 5],
    title: &str,
) -> std::io::Result<()> {
    let (width, height) = (640usize, 360usize);
    let (left, bottom, top) = (50usize, 50usize, 40usize);
    let plot_h = height - bottom - top;
    let mut canvas = Canvas::new(width, height);

    canvas.text(left, 12, &title.to_ascii_uppercase(), [30, 30, 30]);
    // y axis and gridlines at 0/25/50/75/100%
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let y = height - bottom - (frac * plot_h as f64) as usize;
        canvas.fill_rect(left, y, width - left - 20, 1, [210, 210, 210]);
        canvas.text(8, y.saturating_sub(3), &format!("{:3}%", tick * 25), [90, 90, 90]);
    }
    canvas.fill_rect(left, top, 1, height - top - bottom, [40, 40, 40]);
    canvas.fill_rect(left, height - bottom, width - left - 20, 1, [40, 40, 40]);

    let slot = (width - left - 30) / 5;
    let bar_w = slot * 3 / 5;
    for (i, (&acc, label)) in per_class_accuracy.iter().zip(SceneLabel::ALL).enumerate() {
        let acc = acc.clamp(0.0, 1.0);
        let bar_h = (acc * plot_h as f64).round() as usize;
        let x = left + 10 + i * slot;
        canvas.fill_rect(x, height - bottom - bar_h, bar_w, bar_h, BAR_COLORS[i]);
        canvas.text(
            x,
            height - bottom - bar_h - 10,
            &format!("{:.1}%", acc * 100.0),
            [30, 30, 30],
        );
        // class name under the axis, trimmed to the slot width
        let name = label.name();
        let max_chars = (slot / (GLYPH_W + 1)).max(4);
        let shown: String = name.chars().take(max_chars).collect();
        canvas.text(x, height - bottom + 8, &shown, [60, 60, 60]);
    }

    let file = std::fs::File::create(path)?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&canvas.pixels)?;
    Ok(())
}
