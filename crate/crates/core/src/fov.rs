//! Field-of-view detection: find the ultrasound image block inside the
//! vendor frame so the annotations can be cropped away.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{box_kernel, convolve, local_median_threshold, median_filter};
use crate::image::{GrayImage, RectRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FovMethod {
    Auto,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FovResult {
    pub rect: RectRegion,
    pub method: FovMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FovConfig {
    /// Side of the averaging kernel that smears frame text.
    pub box_size: usize,
    pub median_radius: usize,
    pub threshold_window: usize,
    /// Smallest accepted bounding-box area, as a fraction of the image.
    pub min_area_fraction: f64,
    /// Radius of the square binary closing applied before labelling.
    pub close_radius: usize,
    /// Pixels removed from each side of the detected box.
    pub shrink: usize,
}

impl Default for FovConfig {
    fn default() -> Self {
        Self {
            box_size: 5,
            median_radius: 3,
            threshold_window: 63,
            min_area_fraction: 0.25,
            close_radius: 3,
            shrink: 2,
        }
    }
}

impl FovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.box_size.is_multiple_of(2) || self.threshold_window.is_multiple_of(2) {
            return Err(Error::param("fov box_size and threshold_window must be odd"));
        }
        if !(0.0..=1.0).contains(&self.min_area_fraction) {
            return Err(Error::param("fov min_area_fraction must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Separable square max (`dilate`) or min filter of a binary mask. Pixels
/// outside the image are ignored.
fn morph(mask: &GrayImage, radius: usize, dilate: bool) -> GrayImage {
    let (w, h) = (mask.width(), mask.height());
    let pick = |a: f64, b: f64| if dilate { a.max(b) } else { a.min(b) };
    let mut tmp = GrayImage::new(w, h);
    for y in 0..h {
        let row = mask.row(y);
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            tmp.set(x, y, row[lo..=hi].iter().copied().reduce(pick).unwrap_or(0.0));
        }
    }
    GrayImage::from_fn(w, h, |x, y| {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        (lo..=hi).map(|yy| tmp.get(x, yy)).reduce(pick).unwrap_or(0.0)
    })
}

/// Bounding box of the largest 8-connected foreground component.
fn largest_component(mask: &GrayImage) -> Option<(RectRegion, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut best: Option<(RectRegion, usize)> = None;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || mask.data()[start] == 0.0 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut count = 0;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if !seen[j] && mask.data()[j] != 0.0 {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((RectRegion::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1), count));
        }
    }
    best
}

pub fn detect_field_of_view(img: &GrayImage, cfg: &FovConfig) -> Result<FovResult> {
    let smoothed = convolve(img, &box_kernel(cfg.box_size)?, true);
    let smoothed = median_filter(&smoothed, cfg.median_radius);
    let mask = local_median_threshold(&smoothed, cfg.threshold_window)?;
    // the above-median phase of a uniform texture barely percolates; closing joins it
    let mask = if cfg.close_radius > 0 {
        morph(&morph(&mask, cfg.close_radius, true), cfg.close_radius, false)
    } else {
        mask
    };
    let (bbox, _) = largest_component(&mask)
        .ok_or_else(|| Error::DetectionFailed("no foreground found".into()))?;
    let total = (img.width() * img.height()) as f64;
    if (bbox.area() as f64) < cfg.min_area_fraction * total {
        return Err(Error::DetectionFailed(format!(
            "largest region {bbox} covers less than {:.0}% of the image",
            cfg.min_area_fraction * 100.0
        )));
    }
    let s = cfg.shrink;
    let rect = if bbox.w > 2 * s && bbox.h > 2 * s {
        RectRegion::new(bbox.x + s, bbox.y + s, bbox.w - 2 * s, bbox.h - 2 * s)
    } else {
        bbox
    };
    Ok(FovResult {
        rect,
        method: FovMethod::Auto,
    })
}

/// Validates a user-supplied crop against the image.
pub fn manual_field_of_view(img: &GrayImage, rect: RectRegion) -> Result<FovResult> {
    if !rect.fits(img.width(), img.height()) {
        return Err(Error::Bounds {
            x: rect.x,
            y: rect.y,
            w: rect.w,
            h: rect.h,
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(FovResult {
        rect,
        method: FovMethod::Manual,
    })
}
