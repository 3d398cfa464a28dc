use crate::error::{Error, Result};
use crate::image::{reflect, GrayImage};
use crate::par;

/// Dense 2-D weight grid with odd dimensions, centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::param(format!(
                "kernel dimensions must be odd, got {width}x{height}"
            )));
        }
        if weights.len() != width * height {
            return Err(Error::param("kernel weight count does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weight(&self, kx: usize, ky: usize) -> f64 {
        self.weights[ky * self.width + kx]
    }
}

/// Normalized `size`x`size` averaging kernel.
pub fn box_kernel(size: usize) -> Result<Kernel> {
    let n = size * size;
    Kernel::new(size, size, vec![1.0 / n as f64; n])
}

/// Discrete convolution with reflect borders. `clamp` limits the result to [0, 1].
pub fn convolve(img: &GrayImage, kernel: &Kernel, clamp: bool) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((kernel.width / 2) as isize, (kernel.height / 2) as isize);
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ky in 0..kernel.height {
                let sy = reflect(y as isize - (ky as isize - cy), h);
                let src = img.row(sy);
                for kx in 0..kernel.width {
                    let sx = reflect(x as isize - (kx as isize - cx), w);
                    acc += kernel.weight(kx, ky) * src[sx];
                }
            }
            *o = if clamp { acc.clamp(0.0, 1.0) } else { acc };
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_kernel() {
        let img = GrayImage::from_fn(6, 5, |x, y| (x * 3 + y) as f64 / 20.0);
        let k = Kernel::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(convolve(&img, &k, false), img);
    }

    #[test]
    fn box_preserves_constant() {
        let img = GrayImage::filled(9, 7, 0.37);
        let out = convolve(&img, &box_kernel(3).unwrap(), false);
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let mut img = GrayImage::new(9, 9);
        img.set(4, 4, 1.0);
        let weights: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let k = Kernel::new(5, 3, weights).unwrap();
        let out = convolve(&img, &k, false);
        for ky in 0..3 {
            for kx in 0..5 {
                assert_eq!(out.get(4 + kx - 2, 4 + ky - 1), k.weight(kx, ky));
            }
        }
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(Kernel::new(2, 3, vec![0.0; 6]).is_err());
    }

    proptest! {
        #[test]
        fn convolution_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            let f = |s: u64| GrayImage::from_fn(8, 7, move |x, y| {
                (((x as u64 * 7919 + y as u64 * 104729 + s * 31) % 1000) as f64) / 1000.0
            });
            let (i, j) = (f(seed), f(seed + 1));
            let k = Kernel::new(3, 5, (0..15).map(|v| (v as f64 - 7.0) / 10.0).collect()).unwrap();
            let combo = GrayImage::from_fn(8, 7, |x, y| a * i.get(x, y) + b * j.get(x, y));
            let lhs = convolve(&combo, &k, false);
            let (ci, cj) = (convolve(&i, &k, false), convolve(&j, &k, false));
            for idx in 0..lhs.len() {
                let rhs = a * ci.data()[idx] + b * cj.data()[idx];
                prop_assert!((lhs.data()[idx] - rhs).abs() < 1e-9);
            }
        }
    }
}
