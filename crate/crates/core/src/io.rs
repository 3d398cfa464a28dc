//! Image decoding and PNG encoding.

use std::io::ErrorKind;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::overlay::{rasterize, DrawOp};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Reads a PNG, TIFF, BMP or JPEG file into a normalized grayscale image.
///
/// 8- and 16-bit samples are scaled to [0, 1]; color images are reduced with
/// luminance weights 0.299 R + 0.587 G + 0.114 B.
pub fn decode_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bytes(&bytes).map_err(|e| match e {
        DecodeFailure::Unsupported(message) => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        DecodeFailure::Corrupt(message) => {
            Error::io(path, std::io::Error::new(ErrorKind::InvalidData, message))
        }
    })
}

enum DecodeFailure {
    Unsupported(String),
    Corrupt(String),
}

fn decode_bytes(bytes: &[u8]) -> std::result::Result<GrayImage, DecodeFailure> {
    let format = image::guess_format(bytes)
        .map_err(|e| DecodeFailure::Unsupported(e.to_string()))?;
    if !matches!(
        format,
        ImageFormat::Png | ImageFormat::Tiff | ImageFormat::Bmp | ImageFormat::Jpeg
    ) {
        return Err(DecodeFailure::Unsupported(format!("{format:?} is not supported")));
    }
    let dynamic = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| DecodeFailure::Corrupt(e.to_string()))?;
    Ok(to_gray(&dynamic))
}

fn to_gray(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| luma8(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(b) => b.pixels().map(|p| luma8(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgb16(b) => b.pixels().map(|p| luma16(p.0)).collect(),
        DynamicImage::ImageRgba16(b) => b
            .pixels()
            .map(|p| luma16([p.0[0], p.0[1], p.0[2]]))
            .collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| {
                (LUMA_R * p.0[0] as f64 + LUMA_G * p.0[1] as f64 + LUMA_B * p.0[2] as f64)
                    .clamp(0.0, 1.0)
            })
            .collect(),
    };
    GrayImage::from_vec(w, h, data).expect("decoder dimensions are consistent")
}

fn luma8(r: u8, g: u8, b: u8) -> f64 {
    (LUMA_R * r as f64 + LUMA_G * g as f64 + LUMA_B * b as f64) / 255.0
}

fn luma16(p: [u16; 3]) -> f64 {
    (LUMA_R * p[0] as f64 + LUMA_G * p[1] as f64 + LUMA_B * p[2] as f64) / 65535.0
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `img` as PNG. With an empty draw list the file is 8-bit grayscale;
/// otherwise the overlay is rasterized in color onto the gray background.
pub fn encode_image(img: &GrayImage, path: impl AsRef<Path>, overlay: &[DrawOp]) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = if overlay.is_empty() {
        let buf: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
        image::GrayImage::from_raw(w, h, buf)
            .expect("buffer matches dimensions")
            .save_with_format(path, ImageFormat::Png)
    } else {
        rasterize(img, overlay).save_with_format(path, ImageFormat::Png)
    };
    result.map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    })
}
