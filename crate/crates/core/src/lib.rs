#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aponeurosis;
pub mod architecture;
pub mod error;
pub mod filters;
pub mod fov;
pub mod frequency;
pub mod image;
pub mod io;
pub mod orientation;
pub mod overlay;
pub mod par;
pub mod pipeline;
pub mod validation;

pub use error::{Error, Result};
pub use image::{crop, flip_horizontal, GrayImage, RectRegion, StraightLine};
pub use io::{decode_image, encode_image};
