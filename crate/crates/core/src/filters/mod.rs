//! Spatial-domain filters. All use reflect (half-sample symmetric) borders and
//! preserve image dimensions.

mod canny;
mod clahe;
mod convolve;
mod gaussian;
mod hessian;
mod median;
mod nlm;

use serde::{Deserialize, Serialize};

pub use canny::canny_edges;
pub use clahe::clahe;
pub use convolve::{box_kernel, convolve, Kernel};
pub use gaussian::{gaussian_blur, gaussian_kernel};
pub use hessian::{hessian_at_scale, tubeness, HessianField};
pub use median::{local_median_threshold, median_filter};
pub use nlm::{estimate_noise_variance, nlm_denoise};

use crate::error::{Error, Result};

/// Parameters for the denoising and contrast filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Non-local means smoothing strength, in intensity units.
    pub nlm_h: f64,
    /// Patch side, odd.
    pub nlm_patch: usize,
    /// Search window side, odd.
    pub nlm_search: usize,
    pub median_radius: usize,
    /// CLAHE tile side in pixels.
    pub clahe_tile: usize,
    /// CLAHE slope limit relative to a uniform histogram.
    pub clahe_clip: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            nlm_h: 0.1,
            nlm_patch: 5,
            nlm_search: 11,
            median_radius: 2,
            clahe_tile: 64,
            clahe_clip: 3.0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nlm_h > 0.0) {
            return Err(Error::param("nlm_h must be positive"));
        }
        if self.nlm_patch == 0 || self.nlm_patch.is_multiple_of(2) {
            return Err(Error::param("nlm_patch must be odd"));
        }
        if self.nlm_search.is_multiple_of(2) || self.nlm_search <= self.nlm_patch {
            return Err(Error::param("nlm_search must be odd and larger than nlm_patch"));
        }
        if self.median_radius == 0 {
            return Err(Error::param("median_radius must be >= 1"));
        }
        if self.clahe_tile < 8 {
            return Err(Error::param("clahe_tile must be >= 8"));
        }
        if !(self.clahe_clip >= 1.0) {
            return Err(Error::param("clahe_clip must be >= 1"));
        }
        Ok(())
    }
}
