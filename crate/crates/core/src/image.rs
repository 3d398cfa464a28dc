//! Grayscale rasters and the small geometric types shared by every stage.
//!
//! Coordinates: origin top-left, x to the right, y downward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major floating-point grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image dimensions must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::param(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with reflect (half-sample symmetric) border handling.
    #[inline]
    pub fn get_reflect(&self, x: isize, y: isize) -> f64 {
        self.get(reflect(x, self.width), reflect(y, self.height))
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn full_rect(&self) -> RectRegion {
        RectRegion::new(0, 0, self.width, self.height)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Linearly maps [min, max] onto [0, 1]. A flat image maps to all zeros.
    pub fn rescaled(&self) -> GrayImage {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let data = if span > 0.0 && span.is_finite() {
            self.data.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.data.len()]
        };
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn clamped(mut self) -> GrayImage {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Half-sample symmetric reflection of `i` into `0..n` (`d c b a | a b c d`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if (0..n).contains(&i) {
        return i as usize;
    }
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectRegion {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RectRegion {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// `inner` expressed in the coordinates of the image this rect indexes.
    pub fn compose(&self, inner: &RectRegion) -> RectRegion {
        RectRegion::new(self.x + inner.x, self.y + inner.y, inner.w, inner.h)
    }
}

impl std::fmt::Display for RectRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl std::str::FromStr for RectRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::param(format!("expected x,y,w,h, got {s:?}")));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::param(format!("bad rectangle component {p:?}")))?;
        }
        if v[2] == 0 || v[3] == 0 {
            return Err(Error::param("rectangle width and height must be >= 1"));
        }
        Ok(RectRegion::new(v[0], v[1], v[2], v[3]))
    }
}

/// `y = slope * x + intercept` over a nominal x domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightLine {
    pub slope: f64,
    pub intercept: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl StraightLine {
    pub fn new(slope: f64, intercept: f64, x_min: f64, x_max: f64) -> Result<Self> {
        if !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::param("line slope and intercept must be finite"));
        }
        if !(x_min < x_max) {
            return Err(Error::param(format!(
                "line domain [{x_min}, {x_max}] is empty"
            )));
        }
        Ok(Self {
            slope,
            intercept,
            x_min,
            x_max,
        })
    }

    /// Line through `(x0, y0)` at `angle_deg` (positive rises toward the left).
    pub fn through_point(x0: f64, y0: f64, angle_deg: f64, x_min: f64, x_max: f64) -> Result<Self> {
        let slope = angle_deg.to_radians().tan();
        Self::new(slope, y0 - slope * x0, x_min, x_max)
    }

    #[inline]
    pub fn y_at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    #[inline]
    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Line angle in degrees: positive when the line rises toward the left of
    /// the image (y grows with x, since y points down).
    pub fn angle_deg(&self) -> f64 {
        self.slope.atan().to_degrees()
    }

    /// Perpendicular distance from `(x, y)` to the infinite line.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.slope * x - y + self.intercept).abs() / (1.0 + self.slope * self.slope).sqrt()
    }

    /// Intersection x with another line, if they are not parallel.
    pub fn intersect_x(&self, other: &StraightLine) -> Option<f64> {
        let ds = self.slope - other.slope;
        if ds.abs() < 1e-12 {
            None
        } else {
            Some((other.intercept - self.intercept) / ds)
        }
    }
}

pub fn crop(img: &GrayImage, r: &RectRegion) -> Result<GrayImage> {
    if !r.fits(img.width(), img.height()) {
        return Err(Error::Bounds {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut data = Vec::with_capacity(r.area());
    for y in r.y..r.y + r.h {
        data.extend_from_slice(&img.row(y)[r.x..r.x + r.w]);
    }
    GrayImage::from_vec(r.w, r.h, data)
}

pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.len());
    for y in 0..img.height() {
        data.extend(img.row(y).iter().rev());
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| (y * w + x) as f64 / (w * h) as f64)
    }

    #[test]
    fn crop_full_rect_is_identity() {
        let img = ramp(7, 5);
        assert_eq!(crop(&img, &img.full_rect()).unwrap(), img);
    }

    #[test]
    fn crop_interior_block() {
        let img = ramp(4, 4);
        let c = crop(&img, &RectRegion::new(1, 1, 2, 2)).unwrap();
        assert_eq!(c.width(), 2);
        assert_eq!(c.data(), &[img.get(1, 1), img.get(2, 1), img.get(1, 2), img.get(2, 2)]);
    }

    #[test]
    fn crop_out_of_bounds() {
        let img = ramp(4, 4);
        assert!(matches!(
            crop(&img, &RectRegion::new(3, 3, 2, 2)),
            Err(Error::Bounds { .. })
        ));
    }

    #[test]
    fn flip_reverses_rows() {
        let img = GrayImage::from_vec(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(flip_horizontal(&img).data(), &[0.3, 0.2, 0.1]);
        let sym = GrayImage::from_vec(3, 1, vec![0.4, 0.9, 0.4]).unwrap();
        assert_eq!(flip_horizontal(&sym), sym);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
        assert_eq!(reflect(-12, 3), 0);
        assert_eq!(reflect(2, 1), 0);
    }

    #[test]
    fn rect_parse() {
        let r: RectRegion = "10, 20,30,40".parse().unwrap();
        assert_eq!(r, RectRegion::new(10, 20, 30, 40));
        assert!("1,2,3".parse::<RectRegion>().is_err());
        assert!("1,2,0,3".parse::<RectRegion>().is_err());
    }

    #[test]
    fn line_angle_sign() {
        // y grows with x: rises toward the left on screen
        let l = StraightLine::new(0.1, 0.0, 0.0, 10.0).unwrap();
        assert!(l.angle_deg() > 0.0);
        assert!(StraightLine::new(0.0, 0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn flip_is_involution_and_keeps_histogram(
            w in 1usize..12, h in 1usize..12, seed in any::<u64>()
        ) {
            let img = GrayImage::from_fn(w, h, |x, y| {
                ((x as u64 * 31 + y as u64 * 17 + seed) % 97) as f64 / 96.0
            });
            let f = flip_horizontal(&img);
            prop_assert_eq!(&flip_horizontal(&f), &img);
            let mut a = img.data().to_vec();
            let mut b = f.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn crop_composes(
            x1 in 0usize..4, y1 in 0usize..4, w1 in 4usize..8, h1 in 4usize..8,
            x2 in 0usize..2, y2 in 0usize..2, w2 in 1usize..3, h2 in 1usize..3,
        ) {
            let img = ramp(12, 12);
            let r1 = RectRegion::new(x1, y1, w1, h1);
            let r2 = RectRegion::new(x2, y2, w2, h2);
            let twice = crop(&crop(&img, &r1).unwrap(), &r2).unwrap();
            let once = crop(&img, &r1.compose(&r2)).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
