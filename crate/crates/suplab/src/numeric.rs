//! Dense linear algebra, seeded randomness, Adam, schedules, and gradient
//! checking. Everything downstream builds on these primitives.

pub mod adam;
pub mod gradcheck;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod schedule;

pub use adam::{clip_gradient_norm, clip_gradient_norm_all, AdamState};
pub use gradcheck::{finite_difference_gradient, max_rel_err};
pub use linalg::{lstsq_minnorm, qr_thin, svd, LstsqFit, Svd};
pub use matrix::{axpy, dot, norm2, normalize, scale_in_place, Matrix};
pub use rng::SeededRng;
pub use schedule::{schedule_value, Schedule};
