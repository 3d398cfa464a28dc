//! Vector draw lists and their rasterization onto a grayscale background.

use crate::image::GrayImage;
use crate::io::quantize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const GREEN: Rgb = Rgb([0, 255, 0]);
    pub const YELLOW: Rgb = Rgb([255, 255, 0]);
    pub const RED: Rgb = Rgb([255, 0, 0]);
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
}

#[derive(Debug, Clone, PartialEq)]
pub enum DrawOp {
    Line {
        from: (f64, f64),
        to: (f64, f64),
        color: Rgb,
        dashed: bool,
    },
    Rect {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        color: Rgb,
    },
    Text {
        x: f64,
        y: f64,
        text: String,
        color: Rgb,
        scale: u32,
    },
}

impl DrawOp {
    pub fn color(&self) -> Rgb {
        match self {
            DrawOp::Line { color, .. } | DrawOp::Rect { color, .. } | DrawOp::Text { color, .. } => {
                *color
            }
        }
    }
}

const DASH_ON: f64 = 6.0;
const DASH_PERIOD: f64 = 10.0;

pub fn rasterize(img: &GrayImage, ops: &[DrawOp]) -> image::RgbImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut out = image::RgbImage::from_fn(w, h, |x, y| {
        let g = quantize(img.get(x as usize, y as usize));
        image::Rgb([g, g, g])
    });
    for op in ops {
        match op {
            DrawOp::Line {
                from,
                to,
                color,
                dashed,
            } => draw_line(&mut out, *from, *to, *color, *dashed),
            DrawOp::Rect { x, y, w, h, color } => {
                let (x1, y1) = (x + w - 1.0, y + h - 1.0);
                for (a, b) in [
                    ((*x, *y), (x1, *y)),
                    ((x1, *y), (x1, y1)),
                    ((x1, y1), (*x, y1)),
                    ((*x, y1), (*x, *y)),
                ] {
                    draw_line(&mut out, a, b, *color, false);
                }
            }
            DrawOp::Text {
                x,
                y,
                text,
                color,
                scale,
            } => draw_text(&mut out, *x, *y, text, *color, (*scale).max(1)),
        }
    }
    out
}

fn put(out: &mut image::RgbImage, x: f64, y: f64, color: Rgb) {
    let (xi, yi) = (x.round(), y.round());
    if xi >= 0.0 && yi >= 0.0 && (xi as u32) < out.width() && (yi as u32) < out.height() {
        out.put_pixel(xi as u32, yi as u32, image::Rgb(color.0));
    }
}

fn draw_line(out: &mut image::RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb, dashed: bool) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    let steps = (len * 2.0).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        if dashed && (t * len) % DASH_PERIOD >= DASH_ON {
            continue;
        }
        put(out, a.0 + t * dx, a.1 + t * dy, color);
    }
}

fn draw_text(out: &mut image::RgbImage, x: f64, y: f64, text: &str, color: Rgb, scale: u32) {
    let s = scale as f64;
    let mut cx = x;
    for ch in text.chars() {
        if ch == '\n' {
            continue;
        }
        let rows = glyph(ch);
        for (ry, bits) in rows.iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    for sy in 0..scale {
                        for sx in 0..scale {
                            put(
                                out,
                                cx + col as f64 * s + sx as f64,
                                y + ry as f64 * s + sy as f64,
                                color,
                            );
                        }
                    }
                }
            }
        }
        cx += 6.0 * s;
    }
}

/// 5x7 bitmap glyphs, one byte per row, bit 4 = leftmost column.
fn glyph(ch: char) -> [u8; 7] {
    match ch.to_ascii_uppercase() {
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
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
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
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '/' => [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '°' => [0x0C, 0x12, 0x12, 0x0C, 0x00, 0x00, 0x00],
        ' ' => [0; 7],
        _ => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
    }
}
