//! Dense linear algebra, activations, sampling, Adam, and finite-difference
//! gradient checking.

mod adam;
mod gradcheck;
mod param;
mod rng;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use param::{Param, ParamSet};
pub use rng::Rng;
pub use tensor::{affine, argmax, dot, sample_categorical, sigmoid, softmax_stable, Tensor};

/// Inverted dropout mask: each entry is `1/retain` with probability `retain`,
/// else 0. `retain >= 1` yields an all-ones mask without touching the rng.
pub fn dropout_mask(len: usize, retain: f64, rng: &mut Rng) -> Vec<f64> {
    if retain >= 1.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / retain;
    (0..len).map(|_| if rng.bernoulli(retain) { keep } else { 0.0 }).collect()
}
