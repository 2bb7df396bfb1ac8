//! Dense matrices, a small linear solver and the seeded generator shared by
//! every other module.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{ridge_fit, solve};
pub(crate) use matrix::softmax_in_place;
pub use matrix::{mean_of, Matrix};
pub use rng::{derive_seed, SeededRng};
