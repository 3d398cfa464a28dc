//! Fascicle orientation: ROI layout between the aponeuroses, fascicle
//! enhancement and the structure-tensor dominant direction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aponeurosis::AponeurosisPair;
use crate::error::{Error, Result};
use crate::filters::{gaussian_blur, median_filter, nlm_denoise, tubeness, FilterParams};
use crate::frequency::{fft2, ifft2, threshold_spectrum, SpectrumMode};
use crate::image::{crop, GrayImage, RectRegion};
use crate::par;

/// Coherence at or below this is flagged as unreliable.
pub const LOW_COHERENCE: f64 = 0.2;

/// Pixels kept clear of each aponeurosis line.
const LINE_GUARD: f64 = 3.0;

/// Smallest usable inter-aponeurosis gap, pixels.
const MIN_GAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Signed maximum.
    #[default]
    Max,
    Mean,
    Median,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(Error::param(format!("unknown aggregation '{other}' (max, mean, median)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiAnchor {
    /// Hug the deep aponeurosis.
    #[default]
    Deep,
    Centered,
}

impl fmt::Display for RoiAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Deep => "deep",
            Self::Centered => "centered",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrientationConfig {
    pub n_rois: usize,
    /// ROI width, percent of the FoV width.
    pub roi_width_pct: f64,
    /// ROI height, percent of the local inter-aponeurosis gap.
    pub roi_height_pct: f64,
    pub spectrum_mode: SpectrumMode,
    pub spectrum_k: f64,
    /// Tubeness scale for fascicle enhancement.
    pub log_sigma: f64,
    /// Structure-tensor window.
    pub window_sigma: f64,
    pub aggregation: Aggregation,
    pub anchor: RoiAnchor,
    pub filters: FilterParams,
}

impl Default for OrientationConfig {
    fn default() -> Self {
        Self {
            n_rois: 3,
            roi_width_pct: 60.0,
            roi_height_pct: 90.0,
            spectrum_mode: SpectrumMode::Auto,
            spectrum_k: 2.0,
            log_sigma: 4.0,
            window_sigma: 3.0,
            aggregation: Aggregation::Max,
            anchor: RoiAnchor::Deep,
            filters: FilterParams {
                nlm_h: 0.05,
                ..FilterParams::default()
            },
        }
    }
}

impl OrientationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rois < 2 {
            return Err(Error::param("at least two ROIs are required"));
        }
        if !(self.roi_width_pct > 0.0 && self.roi_width_pct <= 100.0) {
            return Err(Error::param("roi_width_pct must be in (0, 100]"));
        }
        if !(self.roi_height_pct > 0.0 && self.roi_height_pct <= 100.0) {
            return Err(Error::param("roi_height_pct must be in (0, 100]"));
        }
        if self.n_rois as f64 * self.roi_width_pct <= 100.0 {
            return Err(Error::param(format!(
                "{} ROIs of {}% width do not overlap",
                self.n_rois, self.roi_width_pct
            )));
        }
        if !(self.log_sigma > 0.0) || !(self.window_sigma > 0.0) {
            return Err(Error::param("log_sigma and window_sigma must be positive"));
        }
        self.spectrum_mode.validated()?;
        self.filters.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate {
    pub roi_angles: Vec<f64>,
    pub roi_coherences: Vec<f64>,
    pub aggregated_angle: f64,
    pub method_used: Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantOrientation {
    /// Degrees in (-90, 90].
    pub angle: f64,
    pub coherence: f64,
}

impl DominantOrientation {
    pub fn low_coherence(&self) -> bool {
        self.coherence <= LOW_COHERENCE
    }
}

/// Lays out `n_rois` overlapping rectangles across a `fov_width` x
/// `fov_height` FoV, between the aponeuroses of `pair`.
pub fn build_rois(fov_width: usize, fov_height: usize, pair: &AponeurosisPair, cfg: &OrientationConfig) -> Result<Vec<RectRegion>> {
    cfg.validate()?;
    let w = (cfg.roi_width_pct / 100.0 * fov_width as f64).round() as usize;
    if w == 0 || w > fov_width {
        return Err(Error::param("ROI width does not fit the field of view"));
    }
    let stride = (fov_width - w) / (cfg.n_rois - 1);
    (0..cfg.n_rois)
        .map(|i| {
            let x0 = i * stride;
            let (xa, xb) = (x0 as f64, (x0 + w - 1) as f64);
            let sup_low = pair.superficial.y_at(xa).max(pair.superficial.y_at(xb));
            let deep_high = pair.deep.y_at(xa).min(pair.deep.y_at(xb));
            let gap = deep_high - sup_low;
            if gap < MIN_GAP {
                return Err(Error::RoiTooSmall(format!(
                    "aponeuroses are only {gap:.1} px apart over columns {x0}..{}",
                    x0 + w
                )));
            }
            let height = cfg.roi_height_pct / 100.0 * gap;
            let (mut top, mut bottom) = match cfg.anchor {
                RoiAnchor::Deep => {
                    let b = deep_high - LINE_GUARD;
                    (b - height, b)
                }
                RoiAnchor::Centered => {
                    let c = 0.5 * (sup_low + deep_high);
                    (c - 0.5 * height, c + 0.5 * height)
                }
            };
            top = top.max(sup_low + LINE_GUARD).max(0.0);
            bottom = bottom.min(deep_high - LINE_GUARD).min(fov_height as f64);
            let (y0, y1) = (top.round() as usize, bottom.round() as usize);
            if y1 <= y0 || ((y1 - y0) as f64) < MIN_GAP - 2.0 * LINE_GUARD {
                return Err(Error::RoiTooSmall(format!(
                    "ROI over columns {x0}..{} would be {} px tall",
                    x0 + w,
                    y1.saturating_sub(y0)
                )));
            }
            Ok(RectRegion::new(x0, y0, w, y1 - y0))
        })
        .collect()
}

/// Lighter denoising, spectral cleanup and ridge enhancement for one ROI.
pub fn preprocess_roi(roi: &GrayImage, cfg: &OrientationConfig) -> Result<GrayImage> {
    let smoothed = median_filter(roi, cfg.filters.median_radius);
    let denoised = nlm_denoise(&smoothed, &cfg.filters);
    let spec = threshold_spectrum(&fft2(&denoised), cfg.spectrum_mode, cfg.spectrum_k)?;
    Ok(tubeness(&ifft2(&spec), cfg.log_sigma))
}

/// Whole-sample symmetric index, the extension cubic splines assume.
fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - m } else { m }) as usize
}

/// In-place cubic B-spline interpolation prefilter of one line.
fn bspline_prefilter(line: &mut [f64]) {
    let n = line.len();
    if n < 2 {
        return;
    }
    let z = 3f64.sqrt() - 2.0;
    let horizon = ((1e-12f64).ln() / z.abs().ln()).ceil() as usize;
    let mut c0 = 0.0;
    let mut zk = 1.0;
    for k in 0..horizon.min(2 * n - 2) {
        c0 += zk * line[mirror(k as isize, n)];
        zk *= z;
    }
    line[0] = c0;
    for k in 1..n {
        line[k] += z * line[k - 1];
    }
    line[n - 1] = z / (z * z - 1.0) * (line[n - 1] + z * line[n - 2]);
    for k in (0..n - 1).rev() {
        line[k] = z * (line[k + 1] - line[k]);
    }
    for v in line.iter_mut() {
        *v *= 6.0;
    }
}

fn spline_coefficients(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut c = img.clone();
    par::for_each_row(c.data_mut(), w, |_, row| bspline_prefilter(row));
    let mut t: Vec<f64> = (0..w * h).map(|i| c.data()[(i % h) * w + i / h]).collect();
    par::for_each_row(&mut t, h, |_, col| bspline_prefilter(col));
    GrayImage::from_fn(w, h, |x, y| t[x * h + y])
}

/// Spline-derivative gradients at the sample points.
fn spline_gradients(img: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = (img.width(), img.height());
    let c = spline_coefficients(img);
    let at = |x: isize, y: isize| c.get(mirror(x, w), mirror(y, h));
    let mut g = vec![(0.0, 0.0); w * h];
    par::for_each_row(&mut g, w, |y, row| {
        let y = y as isize;
        for (x, o) in row.iter_mut().enumerate() {
            let x = x as isize;
            let dx = |yy: isize| 0.5 * (at(x + 1, yy) - at(x - 1, yy));
            let dy = |xx: isize| 0.5 * (at(xx, y + 1) - at(xx, y - 1));
            let fx = (dx(y - 1) + 4.0 * dx(y) + dx(y + 1)) / 6.0;
            let fy = (dy(x - 1) + 4.0 * dy(x) + dy(x + 1)) / 6.0;
            *o = (fx, fy);
        }
    });
    (
        GrayImage::from_vec(w, h, g.iter().map(|p| p.0).collect()).expect("dims"),
        GrayImage::from_vec(w, h, g.iter().map(|p| p.1).collect()).expect("dims"),
    )
}

const BINS: usize = 360;
const BIN_DEG: f64 = 180.0 / BINS as f64;

fn wrap_deg(a: f64) -> f64 {
    let mut a = (a + 90.0).rem_euclid(180.0) - 90.0;
    if a <= -90.0 {
        a += 180.0;
    }
    a
}

/// Energy-weighted mode of the local structure-tensor orientations.
pub fn dominant_orientation(img: &GrayImage, window_sigma: f64) -> Result<DominantOrientation> {
    let (w, h) = (img.width(), img.height());
    if w < 16 || h < 16 {
        return Err(Error::param(format!("orientation needs at least 16x16 pixels, got {w}x{h}")));
    }
    let (fx, fy) = spline_gradients(img);
    let prod = |f: &dyn Fn(f64, f64) -> f64| {
        let data = fx.data().iter().zip(fy.data()).map(|(&a, &b)| f(a, b)).collect();
        gaussian_blur(&GrayImage::from_vec(w, h, data).expect("dims"), window_sigma)
    };
    let jxx = prod(&|a, _| a * a);
    let jyy = prod(&|_, b| b * b);
    let jxy = prod(&|a, b| a * b);

    let mut hist = [0.0f64; BINS];
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..w * h {
        let (a, b, c) = (jxx.data()[i], jyy.data()[i], jxy.data()[i]);
        sxx += a;
        syy += b;
        sxy += c;
        let energy = a + b;
        if !(energy > 0.0) {
            continue;
        }
        let theta = wrap_deg(0.5 * (-2.0 * c).atan2(b - a).to_degrees());
        let bin = (((theta + 90.0) / BIN_DEG) as usize).min(BINS - 1);
        hist[bin] += energy;
    }
    let trace = sxx + syy;
    if !(trace > 1e-20 * (w * h) as f64) {
        return Err(Error::UndefinedOrientation);
    }
    let coherence = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt() / trace;

    let peak = (0..BINS).fold(0, |best, i| if hist[i] > hist[best] { i } else { best });
    let (l, c, r) = (hist[(peak + BINS - 1) % BINS], hist[peak], hist[(peak + 1) % BINS]);
    let denom = l - 2.0 * c + r;
    let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let angle = wrap_deg(-90.0 + (peak as f64 + 0.5 + offset) * BIN_DEG);
    Ok(DominantOrientation {
        angle,
        coherence: coherence.clamp(0.0, 1.0),
    })
}

/// Combines per-ROI angles. Signed values: `Max` is the largest angle, not
/// the largest magnitude.
pub fn aggregate_orientations(angles: &[f64], method: Aggregation) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::param("no angles to aggregate"));
    }
    Ok(match method {
        Aggregation::Max => angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => angles.iter().sum::<f64>() / angles.len() as f64,
        Aggregation::Median => {
            let mut v = angles.to_vec();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len().is_multiple_of(2) {
                0.5 * (v[m - 1] + v[m])
            } else {
                v[m]
            }
        }
    })
}

/// ROI layout plus per-ROI orientation on the unfiltered FoV.
pub fn estimate_orientation(
    fov: &GrayImage,
    pair: &AponeurosisPair,
    cfg: &OrientationConfig,
) -> Result<(OrientationEstimate, Vec<RectRegion>)> {
    let rois = build_rois(fov.width(), fov.height(), pair, cfg)?;
    let measured = par::map_collect(&rois, |r| {
        let roi = crop(fov, r)?;
        dominant_orientation(&preprocess_roi(&roi, cfg)?, cfg.window_sigma)
    });
    let measured = measured.into_iter().collect::<Result<Vec<_>>>()?;
    let roi_angles: Vec<f64> = measured.iter().map(|m| m.angle).collect();
    let aggregated_angle = aggregate_orientations(&roi_angles, cfg.aggregation)?;
    Ok((
        OrientationEstimate {
            roi_coherences: measured.iter().map(|m| m.coherence).collect(),
            roi_angles,
            aggregated_angle,
            method_used: cfg.aggregation,
        },
        rois,
    ))
}
