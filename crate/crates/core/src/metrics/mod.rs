//! Caption metrics: CIDEr (reward and primary metric), BLEU-4 and ROUGE-L.
//!
//! All metrics are generic over the token type so they can score either
//! vocabulary ids or raw strings. Callers strip BOS/EOS/PAD first.

mod bleu;
mod cider;
mod rouge;

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, DefaultHasher};
use std::hash::Hash;

pub use bleu::bleu4;
pub use cider::{cider, CiderVariant, IdfTable};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

pub const MAX_N: usize = 4;

/// Hash map with a fixed hasher so iteration order (and therefore float
/// summation order) is identical across processes.
pub type FixedMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

/// Reference captions for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptionSet<T> {
    pub video_id: String,
    pub refs: Vec<Vec<T>>,
}

impl<T> CaptionSet<T> {
    pub fn new(video_id: impl Into<String>, refs: Vec<Vec<T>>) -> Self {
        Self {
            video_id: video_id.into(),
            refs,
        }
    }
}

/// Contiguous n-grams with multiplicity; empty when the sentence is shorter than `n`.
pub fn ngram_counts<T: Hash + Eq + Clone>(tokens: &[T], n: usize) -> FixedMap<Vec<T>, usize> {
    let mut counts = FixedMap::default();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}
