//! Superficial and deep aponeurosis detection: band enhancement, edge
//! detection and straight-line registration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{canny_edges, clahe, gaussian_blur, nlm_denoise, tubeness, FilterParams};
use crate::frequency::{angular_distance, fft2, ifft2, orientation_mask, threshold_spectrum, SpectrumMode};
use crate::image::{GrayImage, StraightLine};

/// Smoothing applied before tracking band peaks, pixels.
const PEAK_SMOOTHING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AponeurosisConfig {
    /// Tubeness scale in pixels.
    pub tube_sigma: f64,
    pub canny_sigma: f64,
    /// Hysteresis thresholds, as fractions of the strongest gradient.
    pub canny_low: f64,
    pub canny_high: f64,
    /// Expected fascicle direction, degrees. Structures around it are masked out.
    pub wedge_center: f64,
    pub wedge_half_width: f64,
    /// Orientations within this many degrees of horizontal are never masked.
    pub horizontal_guard: f64,
    pub spectrum_k: f64,
    pub min_separation: f64,
    /// Fraction of the FoV width each line must be supported by.
    pub min_span: f64,
    pub max_fit_rms: f64,
    /// Snap the registered lines to the band intensity peaks.
    pub refine: bool,
    pub filters: FilterParams,
}

impl Default for AponeurosisConfig {
    fn default() -> Self {
        Self {
            tube_sigma: 10.0,
            canny_sigma: 2.0,
            canny_low: 0.05,
            canny_high: 0.15,
            wedge_center: 20.0,
            wedge_half_width: 25.0,
            horizontal_guard: 10.0,
            spectrum_k: 2.0,
            min_separation: 20.0,
            min_span: 0.5,
            max_fit_rms: 3.0,
            refine: true,
            filters: FilterParams::default(),
        }
    }
}

impl AponeurosisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tube_sigma > 0.0) {
            return Err(Error::param("tube_sigma must be positive"));
        }
        if !(self.canny_sigma >= 0.0) {
            return Err(Error::param("canny_sigma must be >= 0"));
        }
        if !(0.0 <= self.canny_low && self.canny_low < self.canny_high && self.canny_high <= 1.0) {
            return Err(Error::param("canny thresholds must satisfy 0 <= low < high <= 1"));
        }
        if !(self.wedge_half_width > 0.0 && self.wedge_half_width < 90.0) {
            return Err(Error::param("wedge_half_width must be in (0, 90)"));
        }
        if !(0.0..90.0).contains(&self.horizontal_guard) {
            return Err(Error::param("horizontal_guard must be in [0, 90)"));
        }
        if !(self.min_span > 0.0 && self.min_span <= 1.0) {
            return Err(Error::param("min_span must be in (0, 1]"));
        }
        if !(self.min_separation >= 0.0) {
            return Err(Error::param("min_separation must be >= 0"));
        }
        if !(self.max_fit_rms > 0.0) {
            return Err(Error::param("max_fit_rms must be positive"));
        }
        self.filters.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AponeurosisPair {
    pub superficial: StraightLine,
    pub deep: StraightLine,
    pub superficial_angle: f64,
    pub deep_angle: f64,
    /// RMS residual of the superficial and deep fits, pixels.
    pub fit_rms: [f64; 2],
}

impl AponeurosisPair {
    pub fn new(superficial: StraightLine, deep: StraightLine, fit_rms: [f64; 2]) -> Self {
        Self {
            superficial,
            deep,
            superficial_angle: superficial.angle_deg(),
            deep_angle: deep.angle_deg(),
            fit_rms,
        }
    }

    /// Vertical gap deep − superficial at `x`.
    pub fn gap_at(&self, x: f64) -> f64 {
        self.deep.y_at(x) - self.superficial.y_at(x)
    }
}

/// Evaluates `line` at `x`; the flag is set when `x` is outside the line's domain.
pub fn extrapolate(line: &StraightLine, x: f64) -> (f64, bool) {
    (line.y_at(x), !line.contains_x(x))
}

/// Enhances near-horizontal bright bands and suppresses fascicle-oriented
/// structure. Output is rescaled to [0, 1].
pub fn preprocess_for_aponeuroses(fov: &GrayImage, cfg: &AponeurosisConfig) -> Result<GrayImage> {
    Ok(enhance(fov, cfg)?.1)
}

/// (denoised, enhanced) images.
fn enhance(fov: &GrayImage, cfg: &AponeurosisConfig) -> Result<(GrayImage, GrayImage)> {
    cfg.validate()?;
    let enhanced = clahe(fov, &cfg.filters);
    let denoised = nlm_denoise(&enhanced, &cfg.filters);
    let tubes = tubeness(&denoised, cfg.tube_sigma);
    let spec = threshold_spectrum(&fft2(&tubes), SpectrumMode::Auto, cfg.spectrum_k)?;
    let (center, half, guard) = (cfg.wedge_center, cfg.wedge_half_width, cfg.horizontal_guard);
    let masked = orientation_mask(&spec, |theta| {
        if angular_distance(theta, 0.0) <= guard || angular_distance(theta, center) > half {
            1.0
        } else {
            0.0
        }
    });
    Ok((denoised, ifft2(&masked)))
}

struct LineFit {
    line: StraightLine,
    rms: f64,
    support: usize,
}

fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// Theil-Sen line: median pairwise slope, median intercept.
fn theil_sen(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut slopes = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if b.0 != a.0 {
                slopes.push((b.1 - a.1) / (b.0 - a.0));
            }
        }
    }
    if slopes.is_empty() {
        return None;
    }
    let slope = median(&mut slopes);
    let mut icpts: Vec<f64> = pts.iter().map(|p| p.1 - slope * p.0).collect();
    Some((slope, median(&mut icpts)))
}

fn fit_with_rejection(pts: &[(f64, f64)], x_max: f64) -> Option<LineFit> {
    let (s0, i0) = theil_sen(pts)?;
    let resid: Vec<f64> = pts.iter().map(|p| (p.1 - (s0 * p.0 + i0)).abs()).collect();
    let mad = median(&mut resid.clone());
    // a tiny floor keeps exactly collinear points when the median residual is 0
    let limit = (2.0 * mad).max(1e-9);
    let kept: Vec<(f64, f64)> = pts
        .iter()
        .zip(&resid)
        .filter(|(_, &r)| r <= limit)
        .map(|(p, _)| *p)
        .collect();
    let (slope, intercept) = least_squares(&kept)?;
    let rms = (kept
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum::<f64>()
        / kept.len() as f64)
        .sqrt();
    Some(LineFit {
        line: StraightLine::new(slope, intercept, 0.0, x_max).ok()?,
        rms,
        support: kept.len(),
    })
}

/// Midline of the band whose outer edge is `outer`: the nearest further edge
/// within `max_band` pixels, averaged with `outer`. Lone edges stand alone.
fn band_midline(outer: usize, inner: impl Iterator<Item = usize>, max_band: usize) -> f64 {
    for y in inner {
        let d = y.abs_diff(outer);
        if d > max_band {
            break;
        }
        if d >= 2 {
            return 0.5 * (outer + y) as f64;
        }
    }
    outer as f64
}

/// Fits the superficial and deep aponeuroses to a binary edge map.
///
/// Each column contributes its topmost edge to the superficial set and its
/// bottommost edge to the deep set. When the opposite flank of the same band
/// is visible within `2 * tube_sigma` pixels, the pair's midpoint is used, so
/// the fitted lines follow band centers.
pub fn register_aponeuroses(edges: &GrayImage, cfg: &AponeurosisConfig) -> Result<AponeurosisPair> {
    let (w, h) = (edges.width(), edges.height());
    if w < 2 || h < 2 {
        return Err(Error::RegistrationFailed("edge map is too small".into()));
    }
    let max_band = (2.0 * cfg.tube_sigma).ceil() as usize;
    let mut sup = Vec::new();
    let mut deep = Vec::new();
    let mut column = Vec::new();
    for x in 0..w {
        column.clear();
        column.extend((0..h).filter(|&y| edges.get(x, y) > 0.5));
        let (Some(&top), Some(&bottom)) = (column.first(), column.last()) else {
            continue;
        };
        if ((bottom - top) as f64) < cfg.min_separation {
            continue;
        }
        let xf = x as f64;
        let limit = (bottom - top) / 2;
        let band = max_band.min(limit);
        sup.push((xf, band_midline(top, column.iter().copied().skip(1), band)));
        deep.push((xf, band_midline(bottom, column.iter().rev().copied().skip(1), band)));
    }
    let need = (cfg.min_span * w as f64).ceil() as usize;
    if sup.len() < need {
        return Err(Error::RegistrationFailed(format!(
            "edges found in {} of {} columns",
            sup.len(),
            w
        )));
    }
    fit_pair(&sup, &deep, w, cfg)
}

fn fit_pair(sup: &[(f64, f64)], deep: &[(f64, f64)], w: usize, cfg: &AponeurosisConfig) -> Result<AponeurosisPair> {
    let need = (cfg.min_span * w as f64).ceil() as usize;
    let x_max = (w - 1) as f64;
    let (Some(s), Some(d)) = (fit_with_rejection(sup, x_max), fit_with_rejection(deep, x_max)) else {
        return Err(Error::RegistrationFailed("degenerate line fit".into()));
    };
    for (name, fit) in [("superficial", &s), ("deep", &d)] {
        if fit.support < need {
            return Err(Error::RegistrationFailed(format!(
                "{name} line supported by {} of {} columns",
                fit.support, w
            )));
        }
        if fit.rms > cfg.max_fit_rms {
            return Err(Error::RegistrationFailed(format!(
                "{name} line fit rms {:.2} px exceeds {:.2}",
                fit.rms, cfg.max_fit_rms
            )));
        }
    }
    let pair = AponeurosisPair::new(s.line, d.line, [s.rms, d.rms]);
    let gap = pair.gap_at(0.0).min(pair.gap_at(x_max));
    if gap < cfg.min_separation {
        return Err(Error::RegistrationFailed(format!(
            "aponeuroses are {gap:.1} px apart, need {}",
            cfg.min_separation
        )));
    }
    Ok(pair)
}

/// Brightest point of `column` within `radius` of `center`, to sub-pixel
/// precision. `None` when the maximum sits on the window edge.
fn column_peak(img: &GrayImage, x: usize, center: f64, radius: usize) -> Option<f64> {
    let h = img.height() as isize;
    let c = center.round() as isize;
    let (lo, hi) = (c - radius as isize, c + radius as isize);
    if lo < 1 || hi >= h - 1 {
        return None;
    }
    let at = |y: isize| img.get(x, y as usize);
    let best = (lo..=hi).fold(lo, |b, y| if at(y) > at(b) { y } else { b });
    if best == lo || best == hi {
        return None;
    }
    let (l, m, r) = (at(best - 1), at(best), at(best + 1));
    let denom = l - 2.0 * m + r;
    let offset = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    Some(best as f64 + offset)
}

/// Re-fits both lines to the intensity ridge of their bands in `img`.
/// Falls back to `pair` when the ridge cannot be followed.
fn refine_to_band_peaks(pair: AponeurosisPair, img: &GrayImage, cfg: &AponeurosisConfig) -> AponeurosisPair {
    let smooth = gaussian_blur(img, PEAK_SMOOTHING);
    let radius = ((0.5 * cfg.tube_sigma).ceil() as usize).max(3);
    let track = |line: &StraightLine| -> Vec<(f64, f64)> {
        (0..smooth.width())
            .filter_map(|x| column_peak(&smooth, x, line.y_at(x as f64), radius).map(|y| (x as f64, y)))
            .collect()
    };
    fit_pair(&track(&pair.superficial), &track(&pair.deep), img.width(), cfg).unwrap_or(pair)
}

/// Preprocessing, edge detection and registration in one call.
/// With `refine` set, the registered lines are then moved onto the band
/// intensity peaks of the denoised image.
pub fn detect_aponeuroses(fov: &GrayImage, cfg: &AponeurosisConfig) -> Result<AponeurosisPair> {
    let (denoised, enhanced) = enhance(fov, cfg)?;
    let edges = canny_edges(&enhanced, cfg.canny_sigma, cfg.canny_low, cfg.canny_high)?;
    let pair = register_aponeuroses(&edges, cfg)?;
    Ok(if cfg.refine { refine_to_band_peaks(pair, &denoised, cfg) } else { pair })
}
