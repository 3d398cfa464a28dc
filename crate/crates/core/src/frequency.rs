//! Centered 2-D Fourier spectra, power-spectrum thresholding and directional
//! (wedge) masks.
//!
//! Angles passed to [`wedge_mask`] are spatial orientations in the image
//! convention (degrees, positive rising toward the left). A structure at
//! angle θ puts its spectral energy along θ + 90°.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::par;

/// Centered spectrum of a zero-padded, mean-subtracted image.
#[derive(Debug, Clone)]
pub struct Spectrum {
    width: usize,
    height: usize,
    orig_width: usize,
    orig_height: usize,
    bins: Vec<Complex64>,
    dc_centered: bool,
    /// Largest input magnitude; inverse outputs far below it are rounding noise.
    scale: f64,
}

impl Spectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn original_dims(&self) -> (usize, usize) {
        (self.orig_width, self.orig_height)
    }

    pub fn is_centered(&self) -> bool {
        self.dc_centered
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bin(&self, cx: usize, cy: usize) -> Complex64 {
        self.bins[cy * self.width + cx]
    }

    pub fn re(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.im).collect()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Signed frequency (u, v) of a centered bin, in bins from DC.
    pub fn frequency(&self, cx: usize, cy: usize) -> (isize, isize) {
        (
            cx as isize - (self.width / 2) as isize,
            cy as isize - (self.height / 2) as isize,
        )
    }

    pub fn dc_index(&self) -> usize {
        (self.height / 2) * self.width + self.width / 2
    }

    /// Index of the bin holding the conjugate frequency.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (cx, cy) = (idx % self.width, idx / self.width);
        // dimensions are powers of two, so u -> -u maps centered index c to (n - c) mod n
        let cx2 = (self.width - cx) % self.width;
        let cy2 = (self.height - cy) % self.height;
        cy2 * self.width + cx2
    }
}

fn plan(n: usize, inverse: bool) -> std::sync::Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// In-place 2-D FFT of a row-major `w`x`h` buffer (unnormalized).
fn fft_2d(buf: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let row_fft = plan(w, inverse);
    par::for_each_row(buf, w, |_, row| row_fft.process(row));
    let mut t = vec![Complex64::default(); w * h];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = buf[y * w + x];
        }
    }
    let col_fft = plan(h, inverse);
    par::for_each_row(&mut t, h, |_, col| col_fft.process(col));
    for x in 0..w {
        for y in 0..h {
            buf[y * w + x] = t[x * h + y];
        }
    }
}

/// Swaps between natural DFT order and DC-centered order.
fn shift(buf: &[Complex64], w: usize, h: usize, to_center: bool) -> Vec<Complex64> {
    let (sx, sy) = if to_center {
        (w / 2, h / 2)
    } else {
        (w - w / 2, h - h / 2)
    };
    let mut out = vec![Complex64::default(); w * h];
    for y in 0..h {
        for x in 0..w {
            out[((y + sy) % h) * w + (x + sx) % w] = buf[y * w + x];
        }
    }
    out
}

/// Mean-subtracts, zero-pads to powers of two and returns the centered DFT.
pub fn fft2(img: &GrayImage) -> Spectrum {
    let (ow, oh) = (img.width(), img.height());
    let (w, h) = (ow.next_power_of_two(), oh.next_power_of_two());
    let mean = img.mean();
    let mut buf = vec![Complex64::default(); w * h];
    for y in 0..oh {
        for (x, &v) in img.row(y).iter().enumerate() {
            buf[y * w + x] = Complex64::new(v - mean, 0.0);
        }
    }
    fft_2d(&mut buf, w, h, false);
    Spectrum {
        width: w,
        height: h,
        orig_width: ow,
        orig_height: oh,
        bins: shift(&buf, w, h, true),
        dc_centered: true,
        scale: img.data().iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Inverse transform over the full padded grid, normalized by the bin count.
pub fn ifft2_complex(spec: &Spectrum) -> Vec<Complex64> {
    let (w, h) = (spec.width, spec.height);
    let mut buf = if spec.dc_centered {
        shift(&spec.bins, w, h, false)
    } else {
        spec.bins.clone()
    };
    fft_2d(&mut buf, w, h, true);
    let norm = 1.0 / (w * h) as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    buf
}

/// Real part of the inverse transform, cropped to the original size and
/// rescaled to [0, 1].
pub fn ifft2(spec: &Spectrum) -> GrayImage {
    let full = ifft2_complex(spec);
    let img = GrayImage::from_fn(spec.orig_width, spec.orig_height, |x, y| {
        full[y * spec.width + x].re
    });
    let (lo, hi) = img.min_max();
    if hi - lo <= 1e-12 * spec.scale {
        return GrayImage::new(spec.orig_width, spec.orig_height);
    }
    img.rescaled()
}

/// How the power spectrum threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub enum SpectrumMode {
    /// Keep bins whose log-magnitude is at least mean + k * std.
    #[default]
    Auto,
    /// Zero the given percentage (0-100) of bins with the lowest magnitude.
    Manual(f64),
}

impl fmt::Display for SpectrumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumMode::Auto => f.write_str("auto"),
            SpectrumMode::Manual(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for SpectrumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SpectrumMode::Auto);
        }
        let p: f64 = s
            .trim()
            .trim_end_matches('%')
            .parse()
            .map_err(|_| Error::param(format!("spectrum mode must be 'auto' or a percentile, got {s:?}")))?;
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::param(format!("percentile {p} outside [0, 100]")));
        }
        Ok(SpectrumMode::Manual(p))
    }
}

impl Serialize for SpectrumMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpectrumMode::Auto => s.serialize_str("auto"),
            SpectrumMode::Manual(p) => s.serialize_f64(*p),
        }
    }
}

impl<'de> Deserialize<'de> for SpectrumMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(p) => SpectrumMode::Manual(p)
                .validated()
                .map_err(serde::de::Error::custom),
        }
    }
}

impl SpectrumMode {
    pub fn validated(self) -> Result<Self> {
        match self {
            SpectrumMode::Manual(p) if !(0.0..=100.0).contains(&p) => {
                Err(Error::param(format!("percentile {p} outside [0, 100]")))
            }
            m => Ok(m),
        }
    }
}

/// Conjugate-symmetric log-magnitude per bin: both members of a pair get the
/// same value, so decisions based on it never split a pair.
fn pair_log_magnitude(spec: &Spectrum) -> Vec<f64> {
    (0..spec.bins.len())
        .map(|i| {
            let j = spec.conjugate_index(i);
            let m = 0.5 * (spec.bins[i].norm() + spec.bins[j].norm());
            m.ln_1p()
        })
        .collect()
}

/// Zeroes weak bins of a centered spectrum. The DC bin is always zeroed.
pub fn threshold_spectrum(spec: &Spectrum, mode: SpectrumMode, auto_k: f64) -> Result<Spectrum> {
    if !spec.dc_centered {
        return Err(Error::param("spectrum must be DC-centered"));
    }
    let mode = mode.validated()?;
    let logm = pair_log_magnitude(spec);
    let dc = spec.dc_index();
    let mut out = spec.clone();
    match mode {
        SpectrumMode::Auto => {
            let vals: Vec<f64> = logm
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != dc)
                .map(|(_, &v)| v)
                .collect();
            let n = vals.len().max(1) as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let t = mean + auto_k * sd;
            for (b, &l) in out.bins.iter_mut().zip(&logm) {
                if l < t {
                    *b = Complex64::default();
                }
            }
        }
        SpectrumMode::Manual(p) => {
            // one entry per conjugate pair, weakest first, ties by index
            let mut pairs: Vec<usize> = (0..logm.len())
                .filter(|&i| i <= spec.conjugate_index(i))
                .collect();
            pairs.sort_by(|&a, &b| logm[a].total_cmp(&logm[b]).then(a.cmp(&b)));
            let target = ((p / 100.0) * logm.len() as f64).floor() as usize;
            let mut zeroed = 0;
            for i in pairs {
                if zeroed >= target {
                    break;
                }
                let j = spec.conjugate_index(i);
                out.bins[i] = Complex64::default();
                out.bins[j] = Complex64::default();
                zeroed += if i == j { 1 } else { 2 };
            }
        }
    }
    out.bins[dc] = Complex64::default();
    Ok(out)
}

/// Angular half-width (degrees) of the raised-cosine edge used by
/// [`wedge_mask_tapered`].
pub const DEFAULT_TAPER_DEG: f64 = 2.0;

/// Keeps (`keep = true`) or removes the spectral band of spatial structures
/// oriented within `half_width` degrees of `center_angle`. Hard edges.
pub fn wedge_mask(spec: &Spectrum, center_angle: f64, half_width: f64, keep: bool) -> Result<Spectrum> {
    wedge_mask_tapered(spec, center_angle, half_width, keep, 0.0)
}

/// As [`wedge_mask`], with a raised-cosine transition `taper` degrees wide
/// centered on the wedge edge (0 for a hard edge).
pub fn wedge_mask_tapered(
    spec: &Spectrum,
    center_angle: f64,
    half_width: f64,
    keep: bool,
    taper: f64,
) -> Result<Spectrum> {
    if !(half_width > 0.0 && half_width < 90.0) {
        return Err(Error::param(format!("wedge half width {half_width} outside (0, 90)")));
    }
    let inside = |theta: f64| -> f64 {
        let delta = angular_distance(theta, center_angle);
        if taper <= 0.0 {
            if delta <= half_width { 1.0 } else { 0.0 }
        } else {
            let edge = (delta - half_width) / taper;
            if edge <= -0.5 {
                1.0
            } else if edge >= 0.5 {
                0.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * (edge + 0.5)).cos())
            }
        }
    };
    Ok(orientation_mask(spec, |theta| {
        let m = inside(theta);
        if keep { m } else { 1.0 - m }
    }))
}

/// Distance between two orientations (mod 180°), in [0, 90].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Multiplies every bin by `weight(theta)`, where `theta` is the spatial
/// orientation (degrees) of the structures that bin represents. Conjugate
/// bins receive the same factor, so the spectrum stays Hermitian. DC is left alone.
pub fn orientation_mask(spec: &Spectrum, weight: impl Fn(f64) -> f64) -> Spectrum {
    let (w, h) = (spec.width, spec.height);
    let factor = |idx: usize| -> Option<f64> {
        let (u, v) = spec.frequency(idx % w, idx / w);
        if u == 0 && v == 0 {
            return None;
        }
        let phi = (v as f64 / h as f64).atan2(u as f64 / w as f64).to_degrees();
        Some(weight(phi - 90.0))
    };
    let mut out = spec.clone();
    for (i, b) in out.bins.iter_mut().enumerate() {
        // Nyquist bins can disagree with their conjugate; the lower index decides
        *b *= factor(i.min(spec.conjugate_index(i))).unwrap_or(1.0);
    }
    out
}
