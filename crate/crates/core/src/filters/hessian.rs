use super::gaussian::gaussian_blur;
use crate::image::GrayImage;
use crate::par;

/// Per-pixel Hessian eigenvalues, ordered `|lambda1| <= |lambda2|`.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub width: usize,
    pub height: usize,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Angle (radians, image coordinates, in (-pi/2, pi/2]) of the
    /// eigenvector belonging to `lambda2`.
    pub direction2: Vec<f64>,
}

/// Scale-normalized Hessian (sigma² times the second derivatives of the
/// sigma-blurred image, by central differences).
pub fn hessian_at_scale(img: &GrayImage, sigma: f64) -> HessianField {
    let smooth = gaussian_blur(img, sigma);
    let (w, h) = (img.width(), img.height());
    let s2 = sigma * sigma;
    let mut eig = vec![(0.0f64, 0.0f64, 0.0f64); w * h];
    par::for_each_row(&mut eig, w, |y, row| {
        let yi = y as isize;
        let g = |dx: isize, x: usize, dy: isize| smooth.get_reflect(x as isize + dx, yi + dy);
        for (x, o) in row.iter_mut().enumerate() {
            let c = g(0, x, 0);
            let dxx = (g(1, x, 0) - 2.0 * c + g(-1, x, 0)) * s2;
            let dyy = (g(0, x, 1) - 2.0 * c + g(0, x, -1)) * s2;
            let dxy = (g(1, x, 1) - g(1, x, -1) - g(-1, x, 1) + g(-1, x, -1)) * 0.25 * s2;
            *o = eigen_sym(dxx, dxy, dyy);
        }
    });
    let mut field = HessianField {
        width: w,
        height: h,
        lambda1: Vec::with_capacity(w * h),
        lambda2: Vec::with_capacity(w * h),
        direction2: Vec::with_capacity(w * h),
    };
    for (l1, l2, d2) in eig {
        field.lambda1.push(l1);
        field.lambda2.push(l2);
        field.direction2.push(d2);
    }
    field
}

/// Eigen-decomposition of `[[a, b], [b, c]]`: (small |λ|, large |λ|, angle of
/// the large one's eigenvector).
fn eigen_sym(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let mean = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (hi, lo) = (mean + d, mean - d);
    let phi_hi = 0.5 * (2.0 * b).atan2(a - c);
    let phi_lo = wrap_half_pi(phi_hi + std::f64::consts::FRAC_PI_2);
    if hi.abs() >= lo.abs() {
        (lo, hi, wrap_half_pi(phi_hi))
    } else {
        (hi, lo, phi_lo)
    }
}

fn wrap_half_pi(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = a;
    while a <= -PI / 2.0 {
        a += PI;
    }
    while a > PI / 2.0 {
        a -= PI;
    }
    a
}

/// Bright-ridge score `|λ2|` where `λ2 < 0`, rescaled so the maximum is 1.
pub fn tubeness(img: &GrayImage, sigma: f64) -> GrayImage {
    let field = hessian_at_scale(img, sigma);
    let raw: Vec<f64> = field
        .lambda2
        .iter()
        .map(|&l2| if l2 < 0.0 { -l2 } else { 0.0 })
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let data = if max > 0.0 {
        raw.iter().map(|v| v / max).collect()
    } else {
        raw
    };
    GrayImage::from_vec(field.width, field.height, data).expect("dimensions unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ridge(w: usize, h: usize, angle_deg: f64, s: f64, bright: bool) -> GrayImage {
        let (sn, cs) = angle_deg.to_radians().sin_cos();
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        GrayImage::from_fn(w, h, |x, y| {
            // distance across a ridge running along (cos, sin)
            let d = -(x as f64 - cx) * sn + (y as f64 - cy) * cs;
            let r = (-d * d / (2.0 * s * s)).exp();
            if bright { 0.2 + 0.6 * r } else { 0.8 - 0.6 * r }
        })
    }

    #[test]
    fn ramp_has_no_curvature() {
        let img = GrayImage::from_fn(40, 30, |x, y| 0.01 * x as f64 + 0.005 * y as f64);
        let f = hessian_at_scale(&img, 2.0);
        // away from the reflect borders, where the ramp folds back
        let margin = 8;
        for y in margin..30 - margin {
            for x in margin..40 - margin {
                let i = y * 40 + x;
                assert!(f.lambda1[i].abs() < 1e-6 && f.lambda2[i].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ridge_crest_points_across() {
        let img = ridge(64, 64, 0.0, 3.0, true);
        let f = hessian_at_scale(&img, 3.0);
        let i = 32 * 64 + 32;
        assert!(f.lambda2[i] < 0.0);
        assert!(f.lambda1[i].abs() <= f.lambda2[i].abs());
        assert!((f.direction2[i].abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn rotated_ridge_rotates_eigenvector() {
        let img = ridge(96, 96, 30.0, 3.0, true);
        let f = hessian_at_scale(&img, 3.0);
        let i = 48 * 96 + 48;
        let across = f.direction2[i].to_degrees();
        // ridge at 30°, normal at 120° ≡ -60°
        assert!((across - (-60.0)).abs() < 2.0, "{across}");
    }

    #[test]
    fn tubeness_responses() {
        assert!(tubeness(&GrayImage::filled(20, 20, 0.3), 2.0).data().iter().all(|&v| v == 0.0));

        let bar = GrayImage::from_fn(64, 64, |_, y| if (29..=33).contains(&y) { 0.9 } else { 0.2 });
        let t = tubeness(&bar, 4.0);
        let row_sum = |y: usize| t.row(y).iter().sum::<f64>();
        let best = (0..64).max_by(|&a, &b| row_sum(a).total_cmp(&row_sum(b))).unwrap();
        assert_eq!(best, 31);

        let dark = ridge(64, 64, 0.0, 3.0, false);
        let t = tubeness(&dark, 3.0);
        assert!(t.get(32, 32) < 1e-9);
    }

    #[test]
    fn tubeness_ignores_offset() {
        let img = ridge(48, 48, 20.0, 2.5, true);
        let shifted = img.map(|v| v + 0.15);
        let (a, b) = (tubeness(&img, 2.5), tubeness(&shifted, 2.5));
        assert!(a.data().iter().all(|&v| v >= 0.0));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
