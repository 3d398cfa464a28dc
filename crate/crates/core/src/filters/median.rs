use crate::error::{Error, Result};
use crate::image::{reflect, GrayImage};
use crate::io::quantize;
use crate::par;

/// Replaces each pixel by the median of its `(2r+1)^2` neighborhood.
pub fn median_filter(img: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    let n = (2 * radius + 1).pow(2);
    let cols: Vec<usize> = (-r..w as isize + r).map(|x| reflect(x, w)).collect();
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        let rows: Vec<&[f64]> = (-r..=r).map(|dy| img.row(reflect(y as isize + dy, h))).collect();
        let mut buf = Vec::with_capacity(n);
        for (x, o) in row.iter_mut().enumerate() {
            buf.clear();
            let span = &cols[x..x + 2 * radius + 1];
            for src in &rows {
                buf.extend(span.iter().map(|&c| src[c]));
            }
            let (_, m, _) = buf.select_nth_unstable_by(n / 2, f64::total_cmp);
            *o = *m;
        }
    });
    out
}

/// Binarizes against the local median: 1 where the pixel exceeds the median of
/// its `window`x`window` neighborhood, 0 otherwise (ties give 0).
///
/// Pixel and neighborhood are compared at 8-bit resolution so that the window
/// median can be maintained with a sliding 256-bin histogram.
pub fn local_median_threshold(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "threshold window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let q: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let r = (window / 2) as isize;
    let rank = (window * window) / 2;
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        let rows: Vec<usize> = (-r..=r).map(|dy| reflect(y as isize + dy, h)).collect();
        let mut hist = [0u32; 256];
        for &sy in &rows {
            for dx in -r..=r {
                hist[q[sy * w + reflect(dx, w)] as usize] += 1;
            }
        }
        for (x, o) in row.iter_mut().enumerate() {
            if x > 0 {
                let leave = reflect(x as isize - 1 - r, w);
                let enter = reflect(x as isize + r, w);
                for &sy in &rows {
                    hist[q[sy * w + leave] as usize] -= 1;
                    hist[q[sy * w + enter] as usize] += 1;
                }
            }
            let mut seen = 0usize;
            let mut median = 255u8;
            for (bin, &count) in hist.iter().enumerate() {
                seen += count as usize;
                if seen > rank {
                    median = bin as u8;
                    break;
                }
            }
            *o = if q[y * w + x] > median { 1.0 } else { 0.0 };
        }
    });
    Ok(out)
}
