//! Non-local means denoising.
//!
//! The image is reflect-padded, then for every offset in the search window the
//! squared difference image is box filtered to get mean patch distances for
//! all pixels at once, so the cost is independent of the patch size. Patch
//! distance is symmetric, so each weight image serves the offset and its
//! negation. Weights follow
//! `exp(-max(d² - 2σn², 0) / h²)`, with the noise variance σn² estimated as
//! the median 3x3 local variance.

use super::FilterParams;
use crate::image::{reflect, GrayImage};
use crate::par;

/// Median over all pixels of the (population) variance in each 3x3 window.
pub fn estimate_noise_variance(img: &GrayImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut vars = GrayImage::new(w, h);
    par::for_each_row(vars.data_mut(), w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let (mut s, mut s2) = (0.0, 0.0);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let v = img.get_reflect(x as isize + dx, y as isize + dy);
                    s += v;
                    s2 += v * v;
                }
            }
            let m = s / 9.0;
            *o = (s2 / 9.0 - m * m).max(0.0);
        }
    });
    let mut v = vars.into_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

const EXP_STEPS: f64 = 64.0;
/// Weights below exp(-40) are dropped.
const EXP_CUTOFF: f64 = 40.0;

/// `exp(-t)` for `t >= 0` from a table at 1/64 steps and a quartic for the
/// remainder; relative error below 1e-11.
struct NegExp {
    table: Vec<f64>,
}

impl NegExp {
    fn new() -> Self {
        let n = (EXP_CUTOFF * EXP_STEPS) as usize + 1;
        Self {
            table: (0..n).map(|k| (-(k as f64) / EXP_STEPS).exp()).collect(),
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        if t >= EXP_CUTOFF {
            return 0.0;
        }
        let k = (t * EXP_STEPS) as usize;
        let r = t - k as f64 / EXP_STEPS;
        self.table[k] * (1.0 - r * (1.0 - r * (0.5 - r * (1.0 / 6.0 - r / 24.0))))
    }
}

pub fn nlm_denoise(img: &GrayImage, params: &FilterParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = params.nlm_patch / 2;
    let sr = params.nlm_search / 2;
    let pad = sr + r;
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let p = GrayImage::from_fn(pw, ph, |x, y| {
        img.get(reflect(x as isize - pad as isize, w), reflect(y as isize - pad as isize, h))
    });
    let p = p.data();
    let inv_h2 = 1.0 / (params.nlm_h * params.nlm_h);
    let offset = 2.0 * estimate_noise_variance(img);
    let norm = 1.0 / ((2 * r + 1) * (2 * r + 1)) as f64;
    let neg_exp = NegExp::new();
    let neg_exp = &neg_exp;

    let mut diff = vec![0.0; pw * ph];
    let mut tmp = vec![0.0; pw * ph];
    let mut wt = vec![0.0; pw * ph];
    // (weight sum, weighted value sum) per output pixel; the center weighs 1
    let mut acc: Vec<(f64, f64)> = img.data().iter().map(|&v| (1.0, v)).collect();

    // one of each +/- offset pair; the weight of (q, q - o) is that of (q - o, q)
    let sr = sr as isize;
    let offsets = (0..=sr).flat_map(|dy| (-sr..=sr).map(move |dx| (dx, dy)));
    for (dx, dy) in offsets.filter(|&(dx, dy)| dy > 0 || dx > 0) {
        par::for_each_row(&mut diff, pw, |y, row| {
            let sy = y as isize + dy;
            if sy >= ph as isize {
                return;
            }
            let here = &p[y * pw..(y + 1) * pw];
            let there = &p[sy as usize * pw..(sy as usize + 1) * pw];
            for (x, o) in row.iter_mut().enumerate() {
                let sx = (x as isize + dx).clamp(0, pw as isize - 1) as usize;
                let d = here[x] - there[sx];
                *o = d * d;
            }
        });
        let diff = &diff;
        par::for_each_row(&mut tmp, pw, |y, row| {
            let s = &diff[y * pw..(y + 1) * pw];
            let mut sum: f64 = s[..2 * r + 1].iter().sum();
            row[r] = sum;
            for x in r + 1..pw - r {
                sum += s[x + r] - s[x - r - 1];
                row[x] = sum;
            }
        });
        let tmp = &tmp;
        par::for_each_row(&mut wt, pw, |y, row| {
            if y < r || y + r >= ph {
                return;
            }
            row.fill(0.0);
            for k in y - r..=y + r {
                for (o, &t) in row.iter_mut().zip(&tmp[k * pw..(k + 1) * pw]) {
                    *o += t;
                }
            }
            for o in row.iter_mut() {
                *o = neg_exp.eval((*o * norm - offset).max(0.0) * inv_h2);
            }
        });
        let wt = &wt;
        par::for_each_row(&mut acc, w, |y, row| {
            let py = y + pad;
            let fwd = (py as isize + dy) as usize;
            let back = (py as isize - dy) as usize;
            for (x, (wsum, vsum)) in row.iter_mut().enumerate() {
                let px = x + pad;
                let a = wt[py * pw + px];
                let bx = (px as isize - dx) as usize;
                let b = wt[back * pw + bx];
                *wsum += a + b;
                *vsum += a * p[fwd * pw + (px as isize + dx) as usize] + b * p[back * pw + bx];
            }
        });
    }
    let data = acc.iter().map(|(wsum, vsum)| vsum / wsum).collect();
    GrayImage::from_vec(w, h, data).expect("dimensions unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn constant_unchanged() {
        let img = GrayImage::filled(20, 15, 0.42);
        let out = nlm_denoise(&img, &FilterParams::default());
        assert!(out.data().iter().all(|v| (v - 0.42).abs() < 1e-12));
    }

    #[test]
    fn reduces_gaussian_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let img = GrayImage::from_fn(64, 64, |_, _| 0.5 + noise.sample(&mut rng));
        let out = nlm_denoise(&img, &FilterParams::default());
        let (vin, vout) = (variance(img.data()), variance(out.data()));
        assert!(vout < 0.25 * vin, "{vout} vs {vin}");
    }

    #[test]
    fn vanishing_h_keeps_input() {
        // flat field (zero noise estimate) with a block of distinct values
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = rand_distr::Uniform::new(0.0, 1.0).unwrap();
        let img = GrayImage::from_fn(32, 32, |x, y| {
            if (10..16).contains(&x) && (12..18).contains(&y) { u.sample(&mut rng) } else { 0.5 }
        });
        let params = FilterParams { nlm_h: 1e-6, ..FilterParams::default() };
        let out = nlm_denoise(&img, &params);
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    /// Direct double loop over search offsets and patch pixels.
    fn brute_force(img: &GrayImage, params: &FilterParams) -> GrayImage {
        let (r, sr) = ((params.nlm_patch / 2) as isize, (params.nlm_search / 2) as isize);
        let offset = 2.0 * estimate_noise_variance(img);
        let at = |x: isize, y: isize| img.get_reflect(x, y);
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let (x, y) = (x as isize, y as isize);
            let (mut ws, mut vs) = (0.0, 0.0);
            for dy in -sr..=sr {
                for dx in -sr..=sr {
                    let mut d = 0.0;
                    for ky in -r..=r {
                        for kx in -r..=r {
                            d += (at(x + kx, y + ky) - at(x + dx + kx, y + dy + ky)).powi(2);
                        }
                    }
                    d /= ((2 * r + 1) * (2 * r + 1)) as f64;
                    let wt = (-(d - offset).max(0.0) / (params.nlm_h * params.nlm_h)).exp();
                    ws += wt;
                    vs += wt * at(x + dx, y + dy);
                }
            }
            vs / ws
        })
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.08).unwrap();
        let img = GrayImage::from_fn(23, 17, |x, y| {
            0.5 + 0.3 * ((x as f64 * 0.7).sin() * (y as f64 * 0.3).cos()) + noise.sample(&mut rng)
        });
        let params = FilterParams { nlm_h: 0.1, ..FilterParams::default() };
        let fast = nlm_denoise(&img, &params);
        let slow = brute_force(&img, &params);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn table_exp_matches_std() {
        let e = NegExp::new();
        for i in 0..40_000 {
            let t = i as f64 * 0.001;
            let want = (-t).exp();
            assert!((e.eval(t) - want).abs() <= 1e-11 * want, "{t}");
        }
        assert_eq!(e.eval(40.0), 0.0);
    }

    #[test]
    fn noise_estimate_tracks_sigma() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let img = GrayImage::from_fn(64, 64, |_, _| 0.5 + noise.sample(&mut rng));
        let est = estimate_noise_variance(&img);
        assert!(est > 0.004 && est < 0.012, "{est}");
    }
}
