//! Contrast-limited adaptive histogram equalization.
//!
//! The image is split into a grid of roughly `clahe_tile`-sized tiles. Each
//! tile gets a 256-bin histogram clipped at `clahe_clip` times the uniform bin
//! height, with the clipped excess spread evenly over all bins. Pixels are
//! mapped through the cumulative histograms of the four nearest tile centers,
//! blended bilinearly.

use super::FilterParams;
use crate::image::GrayImage;
use crate::par;

const BINS: usize = 256;

#[inline]
fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * BINS as f64) as usize).min(BINS - 1)
}

struct Grid {
    bounds: Vec<usize>,
    centers: Vec<f64>,
}

impl Grid {
    fn new(len: usize, tile: usize) -> Self {
        let n = ((len as f64 / tile as f64).round() as usize).clamp(1, len);
        let bounds: Vec<usize> = (0..=n).map(|i| i * len / n).collect();
        let centers = bounds
            .windows(2)
            .map(|b| (b[0] + b[1]) as f64 / 2.0 - 0.5)
            .collect();
        Self { bounds, centers }
    }

    fn count(&self) -> usize {
        self.centers.len()
    }

    /// Lower tile index and blend weight toward the next tile.
    fn locate(&self, p: f64) -> (usize, f64) {
        let c = &self.centers;
        if p <= c[0] || c.len() == 1 {
            return (0, 0.0);
        }
        if p >= c[c.len() - 1] {
            return (c.len() - 1, 0.0);
        }
        let i = c.partition_point(|&ci| ci <= p) - 1;
        (i, (p - c[i]) / (c[i + 1] - c[i]))
    }
}

fn tile_mapping(img: &GrayImage, x0: usize, x1: usize, y0: usize, y1: usize, clip: f64) -> [f64; BINS] {
    let mut hist = [0.0f64; BINS];
    for y in y0..y1 {
        for &v in &img.row(y)[x0..x1] {
            hist[bin_of(v)] += 1.0;
        }
    }
    let total = ((x1 - x0) * (y1 - y0)) as f64;
    if clip.is_finite() {
        let limit = clip * total / BINS as f64;
        let mut excess = 0.0;
        for h in hist.iter_mut() {
            if *h > limit {
                excess += *h - limit;
                *h = limit;
            }
        }
        let share = excess / BINS as f64;
        hist.iter_mut().for_each(|h| *h += share);
    }
    let mut map = [0.0; BINS];
    let mut acc = 0.0;
    for (m, h) in map.iter_mut().zip(hist) {
        acc += h;
        *m = (acc / total).min(1.0);
    }
    map
}

pub fn clahe(img: &GrayImage, params: &FilterParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let tile = params.clahe_tile.max(1);
    let gx = Grid::new(w, tile);
    let gy = Grid::new(h, tile);
    let mut maps = Vec::with_capacity(gx.count() * gy.count());
    for ty in 0..gy.count() {
        for tx in 0..gx.count() {
            maps.push(tile_mapping(
                img,
                gx.bounds[tx],
                gx.bounds[tx + 1],
                gy.bounds[ty],
                gy.bounds[ty + 1],
                params.clahe_clip,
            ));
        }
    }
    let nx = gx.count();
    let mut out = GrayImage::new(w, h);
    par::for_each_row(out.data_mut(), w, |y, row| {
        let (ty, fy) = gy.locate(y as f64);
        let ty1 = (ty + 1).min(gy.count() - 1);
        for (x, o) in row.iter_mut().enumerate() {
            let (tx, fx) = gx.locate(x as f64);
            let tx1 = (tx + 1).min(nx - 1);
            let b = bin_of(img.get(x, y));
            let m = |tx: usize, ty: usize| maps[ty * nx + tx][b];
            let top = (1.0 - fx) * m(tx, ty) + fx * m(tx1, ty);
            let bottom = (1.0 - fx) * m(tx, ty1) + fx * m(tx1, ty1);
            *o = (1.0 - fy) * top + fy * bottom;
        }
    });
    out
}
