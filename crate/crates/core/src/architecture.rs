//! Pennation angle, fascicle length and muscle thickness from a registered
//! aponeurosis pair and a fascicle orientation.
//!
//! Angles follow the image convention used throughout the crate: degrees,
//! positive when a line rises toward the left of the image.

use serde::{Deserialize, Serialize};

use crate::aponeurosis::AponeurosisPair;
use crate::error::{Error, Result};
use crate::image::StraightLine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThicknessMode {
    #[default]
    Perpendicular,
    Vertical,
}

impl std::fmt::Display for ThicknessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Perpendicular => "perpendicular",
            Self::Vertical => "vertical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// Fascicle anchor on the deep line, as a fraction of the FoV width.
    pub anchor_fraction: f64,
    pub thickness_mode: ThicknessMode,
    pub thickness_samples: usize,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            anchor_fraction: 0.95,
            thickness_mode: ThicknessMode::Perpendicular,
            thickness_samples: 100,
        }
    }
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.anchor_fraction) {
            return Err(Error::param("anchor_fraction must be in [0, 1]"));
        }
        if self.thickness_samples < 2 {
            return Err(Error::param("thickness_samples must be >= 2"));
        }
        Ok(())
    }
}

/// Pixel-to-millimetre conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleSpec {
    MmPerPx(f64),
    ScaleBar { px: f64, mm: f64 },
}

impl ScaleSpec {
    pub fn mm_per_px(&self) -> Result<f64> {
        let v = match *self {
            ScaleSpec::MmPerPx(v) => v,
            ScaleSpec::ScaleBar { px, mm } => {
                if !(px > 0.0) || !(mm > 0.0) {
                    return Err(Error::param("scale bar length and span must be positive"));
                }
                mm / px
            }
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(format!("mm per pixel must be positive, got {v}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureResult {
    pub pennation_deg: f64,
    pub fascicle_len_px: f64,
    pub thickness_px: f64,
    pub fascicle_len_mm: Option<f64>,
    pub thickness_mm: Option<f64>,
    /// The fascicle meets the superficial line outside the FoV.
    pub extrapolated: bool,
    pub fascicle_line: StraightLine,
    /// Anchor on the deep line.
    pub fascicle_start: (f64, f64),
    /// Intersection with the superficial line.
    pub fascicle_end: (f64, f64),
    pub scale_mm_per_px: Option<f64>,
    pub scan_depth_mm: Option<f64>,
    pub thickness_mode: ThicknessMode,
}

/// Angle between the fascicle and the deep aponeurosis.
pub fn pennation_angle(theta_fascicle: f64, deep: &StraightLine) -> Result<f64> {
    let p = theta_fascicle - deep.angle_deg();
    if !(p > 0.0 && p < 90.0) {
        return Err(Error::Geometry(format!(
            "pennation {p:.2} deg is outside (0, 90): fascicle at {theta_fascicle:.2}, deep aponeurosis at {:.2}",
            deep.angle_deg()
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FascicleSegment {
    pub length: f64,
    pub line: StraightLine,
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub extrapolated: bool,
}

/// Straight fascicle through the deep-line point at `anchor_fraction * fov_width`,
/// ending on the (possibly extrapolated) superficial line.
pub fn fascicle_length(
    pair: &AponeurosisPair,
    theta_fascicle: f64,
    fov_width: f64,
    anchor_fraction: f64,
) -> Result<FascicleSegment> {
    if !(fov_width > 0.0) {
        return Err(Error::param("fov width must be positive"));
    }
    if !(theta_fascicle.abs() < 90.0) {
        return Err(Error::Geometry(format!("fascicle angle {theta_fascicle} is vertical or invalid")));
    }
    let px = anchor_fraction * fov_width;
    let py = pair.deep.y_at(px);
    let line = StraightLine::through_point(px, py, theta_fascicle, 0.0, fov_width)?;
    let qx = line.intersect_x(&pair.superficial).ok_or(Error::NoIntersection)?;
    let qy = pair.superficial.y_at(qx);
    if !(qx < px) {
        return Err(Error::Geometry(
            "fascicle meets the superficial aponeurosis to the right of its deep anchor".into(),
        ));
    }
    let line = StraightLine::new(line.slope, line.intercept, qx, px)?;
    Ok(FascicleSegment {
        length: (px - qx).hypot(py - qy),
        line,
        start: (px, py),
        end: (qx, qy),
        extrapolated: !(0.0..=fov_width).contains(&qx),
    })
}

/// Mean distance between the aponeuroses over `n_samples` evenly spaced
/// columns spanning the FoV.
pub fn muscle_thickness(pair: &AponeurosisPair, fov_width: f64, n_samples: usize, mode: ThicknessMode) -> f64 {
    let n = n_samples.max(2);
    let last = (fov_width - 1.0).max(0.0);
    let total: f64 = (0..n)
        .map(|i| {
            let x = last * i as f64 / (n - 1) as f64;
            let yd = pair.deep.y_at(x);
            match mode {
                ThicknessMode::Perpendicular => pair.superficial.distance_to(x, yd),
                ThicknessMode::Vertical => yd - pair.superficial.y_at(x),
            }
        })
        .sum();
    total / n as f64
}

/// Converts lengths to millimetres. Angles are untouched.
pub fn apply_scale(result: &ArchitectureResult, scale: &ScaleSpec, depth_mm: Option<f64>) -> Result<ArchitectureResult> {
    let k = scale.mm_per_px()?;
    Ok(ArchitectureResult {
        fascicle_len_mm: Some(result.fascicle_len_px * k),
        thickness_mm: Some(result.thickness_px * k),
        scale_mm_per_px: Some(k),
        scan_depth_mm: depth_mm,
        ..*result
    })
}

pub fn compute_architecture(
    pair: &AponeurosisPair,
    theta_fascicle: f64,
    fov_width: f64,
    cfg: &ArchitectureConfig,
) -> Result<ArchitectureResult> {
    cfg.validate()?;
    let pennation = pennation_angle(theta_fascicle, &pair.deep)?;
    let seg = fascicle_length(pair, theta_fascicle, fov_width, cfg.anchor_fraction)?;
    Ok(ArchitectureResult {
        pennation_deg: pennation,
        fascicle_len_px: seg.length,
        thickness_px: muscle_thickness(pair, fov_width, cfg.thickness_samples, cfg.thickness_mode),
        fascicle_len_mm: None,
        thickness_mm: None,
        extrapolated: seg.extrapolated,
        fascicle_line: seg.line,
        fascicle_start: seg.start,
        fascicle_end: seg.end,
        scale_mm_per_px: None,
        scan_depth_mm: None,
        thickness_mode: cfg.thickness_mode,
    })
}
