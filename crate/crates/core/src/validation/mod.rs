//! Synthetic phantoms with exact ground truth, and Bland-Altman agreement.

mod agreement;
mod phantom;

pub use agreement::{bland_altman, AgreementStats};
pub use phantom::{generate_phantom, PhantomSpec};
