#![allow(dead_code)]

pub mod oracle;

use picknet::glance::Glance;
use picknet::harness::{generate_synthetic, scene_glance, Dataset, SyntheticConfig};

/// A few short videos with 8-dimensional features.
pub fn tiny_dataset(seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_train: 6,
        n_validation: 2,
        n_test: 2,
        feature_dim: 8,
        ..SyntheticConfig::new(seed)
    })
    .unwrap()
}

/// 30 glances where the frames in `keys` carry distinct textures and every
/// other frame is flat gray.
pub fn key_frame_glances(keys: &[usize]) -> Vec<Glance> {
    (0..30)
        .map(|t| match keys.iter().position(|&k| k == t) {
            Some(j) => scene_glance(j % 8, 0.7 * j as f64, 0.0),
            None => Glance::constant(0.5),
        })
        .collect()
}
