use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aponeurosis::AponeurosisPair;
use crate::architecture::{compute_architecture, ArchitectureConfig, ArchitectureResult};
use crate::error::{Error, Result};
use crate::filters::gaussian_blur;
use crate::image::{GrayImage, StraightLine};

const BAND: f64 = 0.9;
const MUSCLE: f64 = 0.35;
const OUTSIDE: f64 = 0.25;
/// Peak stripe excursion at full contrast.
const STRIPE_AMPLITUDE: f64 = 0.25;

/// Geometry and texture of a synthetic muscle image. The muscle is centered
/// vertically at the fascicle anchor column (95% of the width).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub sup_angle: f64,
    pub deep_angle: f64,
    /// Vertical distance between band centers at the anchor column.
    pub gap_at_right: f64,
    pub band_thickness: f64,
    pub fascicle_angle: f64,
    pub fascicle_spacing: f64,
    pub fascicle_contrast: f64,
    pub speckle_sigma: f64,
    pub psf_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 512,
            height: 400,
            sup_angle: 0.0,
            deep_angle: 0.0,
            gap_at_right: 200.0,
            band_thickness: 8.0,
            fascicle_angle: 20.0,
            fascicle_spacing: 14.0,
            fascicle_contrast: 0.6,
            speckle_sigma: 0.2,
            psf_sigma: 1.5,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    fn anchor_x(&self) -> f64 {
        ArchitectureConfig::default().anchor_fraction * self.width as f64
    }

    /// Band center lines, spanning the canvas.
    pub fn lines(&self) -> Result<(StraightLine, StraightLine)> {
        let ax = self.anchor_x();
        let mid = self.height as f64 / 2.0;
        let x_max = (self.width.max(2) - 1) as f64;
        let sup = StraightLine::through_point(ax, mid - self.gap_at_right / 2.0, self.sup_angle, 0.0, x_max)?;
        let deep = StraightLine::through_point(ax, mid + self.gap_at_right / 2.0, self.deep_angle, 0.0, x_max)?;
        Ok((sup, deep))
    }

    pub fn pennation(&self) -> f64 {
        self.fascicle_angle - self.deep_angle
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.width < 32 || self.height < 32 {
            return bad(format!("canvas {}x{} is too small", self.width, self.height));
        }
        let p = self.pennation();
        if !(p > 5.0 && p < 45.0) {
            return bad(format!("pennation {p} deg is outside (5, 45)"));
        }
        if !(self.sup_angle.abs() < 45.0 && self.deep_angle.abs() < 45.0) {
            return bad("aponeurosis angles must be within 45 deg of horizontal".into());
        }
        if !(self.gap_at_right > 0.0 && self.band_thickness > 0.0 && self.fascicle_spacing > 0.0) {
            return bad("gap, band thickness and fascicle spacing must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fascicle_contrast) || !(0.0..=1.0).contains(&self.speckle_sigma) {
            return bad("fascicle_contrast and speckle_sigma must be in [0, 1]".into());
        }
        if !(self.psf_sigma >= 0.0) {
            return bad("psf_sigma must be >= 0".into());
        }
        let (sup, deep) = self.lines()?;
        let half = self.band_thickness / 2.0;
        let x_max = (self.width - 1) as f64;
        for x in [0.0, x_max] {
            let (ys, yd) = (sup.y_at(x), deep.y_at(x));
            if ys - half < 0.0 || yd + half > (self.height - 1) as f64 {
                return bad(format!("bands leave the canvas at x = {x}"));
            }
            if yd - ys <= self.band_thickness {
                return bad(format!("bands overlap at x = {x}"));
            }
        }
        Ok(())
    }
}

/// Fractional coverage of a band of half-width `half` at distance `d`.
fn coverage(d: f64, half: f64) -> f64 {
    (half + 0.5 - d).clamp(0.0, 1.0)
}

/// Renders `spec` and returns the image with its closed-form ground truth.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(GrayImage, ArchitectureResult)> {
    spec.validate()?;
    let (sup, deep) = spec.lines()?;
    let half = spec.band_thickness / 2.0;
    let (s, c) = spec.fascicle_angle.to_radians().sin_cos();
    let omega = 2.0 * std::f64::consts::PI / spec.fascicle_spacing;
    let clean = GrayImage::from_fn(spec.width, spec.height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let (ys, yd) = (sup.y_at(xf), deep.y_at(xf));
        let base = if yf > ys && yf < yd {
            let t = -s * xf + c * yf;
            MUSCLE + spec.fascicle_contrast * STRIPE_AMPLITUDE * (omega * t).cos()
        } else {
            OUTSIDE
        };
        let band = coverage(sup.distance_to(xf, yf), half).max(coverage(deep.distance_to(xf, yf), half));
        base * (1.0 - band) + BAND * band
    });
    let blurred = gaussian_blur(&clean, spec.psf_sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.speckle_sigma;
    let img = blurred.map(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        (v * (sigma * n - 0.5 * sigma * sigma).exp()).clamp(0.0, 1.0)
    });
    let pair = AponeurosisPair::new(sup, deep, [0.0; 2]);
    let truth = compute_architecture(&pair, spec.fascicle_angle, spec.width as f64, &ArchitectureConfig::default())?;
    Ok((img, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_triangle_truth() {
        let spec = PhantomSpec {
            gap_at_right: 150.0,
            speckle_sigma: 0.0,
            psf_sigma: 0.0,
            ..Default::default()
        };
        let (_, t) = generate_phantom(&spec).unwrap();
        assert!((t.thickness_px - 150.0).abs() < 1e-9);
        assert!((t.pennation_deg - 20.0).abs() < 1e-12);
        assert!((t.fascicle_len_px - 438.57).abs() < 0.01, "{}", t.fascicle_len_px);
    }

    #[test]
    fn seeded() {
        let spec = PhantomSpec { seed: 9, ..Default::default() };
        assert_eq!(generate_phantom(&spec).unwrap().0, generate_phantom(&spec).unwrap().0);
        let other = PhantomSpec { seed: 10, ..spec };
        assert_ne!(generate_phantom(&spec).unwrap().0, generate_phantom(&other).unwrap().0);
    }

    #[test]
    fn signed_pennation() {
        let spec = PhantomSpec {
            deep_angle: -3.0,
            fascicle_angle: 18.0,
            ..Default::default()
        };
        let (_, t) = generate_phantom(&spec).unwrap();
        assert!((t.pennation_deg - 21.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_identity() {
        for (tilt, pen) in [(-4.0, 12.0), (0.0, 30.0), (3.0, 17.0)] {
            let spec = PhantomSpec {
                sup_angle: tilt,
                deep_angle: tilt,
                fascicle_angle: tilt + pen,
                ..Default::default()
            };
            let (_, t) = generate_phantom(&spec).unwrap();
            let lhs = t.fascicle_len_px * t.pennation_deg.to_radians().sin();
            assert!((lhs - t.thickness_px).abs() <= 1e-9 * t.thickness_px);
        }
    }

    #[test]
    fn clamping_is_rare() {
        let spec = PhantomSpec {
            speckle_sigma: 0.3,
            ..Default::default()
        };
        let (img, _) = generate_phantom(&spec).unwrap();
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let clamped = img.data().iter().filter(|&&v| v >= 1.0 || v <= 0.0).count();
        assert!((clamped as f64) < 0.01 * img.len() as f64, "{clamped}");
    }

    #[test]
    fn invalid_specs() {
        let off_canvas = PhantomSpec { gap_at_right: 420.0, ..Default::default() };
        assert!(matches!(generate_phantom(&off_canvas), Err(Error::Spec(_))));
        let flat = PhantomSpec { fascicle_angle: 3.0, ..Default::default() };
        assert!(matches!(generate_phantom(&flat), Err(Error::Spec(_))));
    }
}
