use crate::image::{reflect, GrayImage};
use crate::par;

/// Normalized 1-D Gaussian kernel truncated at 3 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves every row with `k` (odd length, centered).
pub(crate) fn filter_rows(img: &GrayImage, k: &[f64]) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = (k.len() / 2) as isize;
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        let src = img.row(y);
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &wk) in k.iter().enumerate() {
                acc += wk * src[reflect(x as isize + i as isize - r, w)];
            }
            *o = acc;
        }
    });
    out
}

/// Convolves every column with `k` (odd length, centered).
pub(crate) fn filter_cols(img: &GrayImage, k: &[f64]) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = (k.len() / 2) as isize;
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        for (i, &wk) in k.iter().enumerate() {
            let src = img.row(reflect(y as isize + i as isize - r, h));
            for (o, &s) in row.iter_mut().zip(src) {
                *o += wk * s;
            }
        }
    });
    out
}

/// Separable Gaussian smoothing; `sigma <= 0` returns a copy.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    filter_cols(&filter_rows(img, &k), &k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (x * 0.31).sin() * (y * 0.17).cos() + 0.1 * ((x + 2.0 * y) * 0.53).sin()
        })
    }

    #[test]
    fn constant_stays_constant() {
        let out = gaussian_blur(&GrayImage::filled(20, 11, 0.8), 2.5);
        assert!(out.data().iter().all(|v| (v - 0.8).abs() < 1e-12));
    }

    #[test]
    fn total_intensity_conserved() {
        let img = texture(37, 23);
        let out = gaussian_blur(&img, 3.0);
        let (a, b): (f64, f64) = (img.data().iter().sum(), out.data().iter().sum());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn semigroup() {
        let img = texture(96, 96);
        let twice = gaussian_blur(&gaussian_blur(&img, 2.0), 3.0);
        let once = gaussian_blur(&img, 13f64.sqrt());
        let rms = (twice
            .data()
            .iter()
            .zip(once.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / img.len() as f64)
            .sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }

    #[test]
    fn dimensions_preserved() {
        let out = gaussian_blur(&texture(5, 3), 4.0);
        assert_eq!((out.width(), out.height()), (5, 3));
    }
}
