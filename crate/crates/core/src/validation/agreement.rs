use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub bias: f64,
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub n: usize,
    /// Least-squares slope of the differences against the pair means.
    pub proportional_slope: f64,
}

/// Bias and 95% limits of agreement of `a - b`.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<AgreementStats> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::param(format!("agreement needs at least 2 pairs, got {n}")));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::param("agreement inputs must be finite"));
    }
    let nf = n as f64;
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let m: Vec<f64> = pairs.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let bias = d.iter().sum::<f64>() / nf;
    let sd_diff = (d.iter().map(|v| (v - bias).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let mean_m = m.iter().sum::<f64>() / nf;
    let smm: f64 = m.iter().map(|v| (v - mean_m).powi(2)).sum();
    let smd: f64 = m.iter().zip(&d).map(|(x, y)| (x - mean_m) * (y - bias)).sum();
    let proportional_slope = if smm > 0.0 { smd / smm } else { 0.0 };
    Ok(AgreementStats {
        bias,
        sd_diff,
        loa_low: bias - 1.96 * sd_diff,
        loa_high: bias + 1.96 * sd_diff,
        n,
        proportional_slope,
    })
}
