//! Canny edge detection: Gaussian smoothing, Sobel gradients, four-direction
//! non-maximum suppression and hysteresis linking.
//!
//! `low` and `high` are fractions of the image's largest gradient magnitude.

use std::collections::VecDeque;

use super::gaussian::gaussian_blur;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::par;

pub(crate) struct Gradients {
    pub magnitude: Vec<f64>,
    /// Quantized direction: 0 = horizontal, 1 = 45°, 2 = vertical, 3 = 135°.
    pub sector: Vec<u8>,
}

pub(crate) fn sobel(img: &GrayImage) -> Gradients {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![(0.0f64, 0u8); w * h];
    par::for_each_row(&mut out, w, |y, row| {
        let yi = y as isize;
        for (x, o) in row.iter_mut().enumerate() {
            let xi = x as isize;
            let p = |dx: isize, dy: isize| img.get_reflect(xi + dx, yi + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1)) / 8.0;
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1)) / 8.0;
            let mag = gx.hypot(gy);
            let mut deg = gy.atan2(gx).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            let sector = (((deg + 22.5) / 45.0) as u8) % 4;
            *o = (mag, sector);
        }
    });
    Gradients {
        magnitude: out.iter().map(|o| o.0).collect(),
        sector: out.iter().map(|o| o.1).collect(),
    }
}

const SECTOR_STEP: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];

pub fn canny_edges(img: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::param(format!(
            "canny thresholds must satisfy 0 <= low < high <= 1, got {low}, {high}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let grad = sobel(&gaussian_blur(img, sigma));
    let mag = &grad.magnitude;
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let mut out = GrayImage::new(w, h);
    if max <= 1e-12 {
        return Ok(out);
    }

    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // thin: strictly above the backward neighbor, at least the forward one
    let mut thin = vec![0.0f64; w * h];
    par::for_each_row(&mut thin, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (sx, sy) = SECTOR_STEP[grad.sector[i] as usize];
            let (xi, yi) = (x as isize, y as isize);
            if m > at(xi - sx, yi - sy) && m >= at(xi + sx, yi + sy) {
                *o = m;
            }
        }
    });

    let (lo, hi) = (low * max, high * max);
    let mut queue = VecDeque::new();
    let data = out.data_mut();
    for (i, &m) in thin.iter().enumerate() {
        if m >= hi && m > 0.0 {
            data[i] = 1.0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if data[j] == 0.0 && thin[j] >= lo && thin[j] > 0.0 {
                    data[j] = 1.0;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_no_edges() {
        let e = canny_edges(&GrayImage::filled(30, 30, 0.5), 2.0, 0.05, 0.15).unwrap();
        assert!(e.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_gives_one_column() {
        let c = 20;
        let img = GrayImage::from_fn(40, 30, |x, _| if x >= c { 1.0 } else { 0.0 });
        let e = canny_edges(&img, 1.5, 0.05, 0.15).unwrap();
        for y in 0..30 {
            let cols: Vec<usize> = (0..40).filter(|&x| e.get(x, y) == 1.0).collect();
            assert_eq!(cols.len(), 1, "row {y}: {cols:?}");
            assert!(cols[0].abs_diff(c) <= 1);
        }
    }

    #[test]
    fn two_transitions_two_thin_rows() {
        let img = GrayImage::from_fn(50, 60, |_, y| if (20..40).contains(&y) { 0.9 } else { 0.1 });
        let e = canny_edges(&img, 2.0, 0.05, 0.15).unwrap();
        let rows: Vec<usize> = (0..60).filter(|&y| (0..50).any(|x| e.get(x, y) == 1.0)).collect();
        assert_eq!(rows.len(), 2, "{rows:?}");
        for &y in &rows {
            assert!((0..50).all(|x| e.get(x, y) == 1.0));
        }
        assert!(rows[0].abs_diff(20) <= 1 && rows[1].abs_diff(39) <= 1);
    }

    #[test]
    fn output_binary_and_thin() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            0.5 + 0.4 * (xf * 0.2 + yf * 0.1).sin() * (yf * 0.13).cos()
        });
        let e = canny_edges(&img, 1.5, 0.1, 0.3).unwrap();
        let grad = sobel(&gaussian_blur(&img, 1.5));
        for y in 0..64 {
            for x in 0..64 {
                let v = e.get(x, y);
                assert!(v == 0.0 || v == 1.0);
                if v == 1.0 {
                    let i = y * 64 + x;
                    let (sx, sy) = SECTOR_STEP[grad.sector[i] as usize];
                    for s in [-1isize, 1] {
                        let (nx, ny) = (x as isize + s * sx, y as isize + s * sy);
                        if nx >= 0 && ny >= 0 && nx < 64 && ny < 64 {
                            assert!(grad.magnitude[ny as usize * 64 + nx as usize] <= grad.magnitude[i]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn thresholds_validated() {
        let img = GrayImage::new(4, 4);
        assert!(canny_edges(&img, 1.0, 0.3, 0.2).is_err());
        assert!(canny_edges(&img, 1.0, -0.1, 0.2).is_err());
    }
}
