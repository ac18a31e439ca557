use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{ngram_counts, CaptionSet, FixedMap, MAX_N};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiderVariant {
    /// TF-IDF cosine averaged over references and n = 1..4, scaled by 10.
    #[default]
    Plain,
    /// Clipped TF-IDF with a Gaussian length penalty (sigma 6).
    CiderD,
}

impl CiderVariant {
    pub fn name(self) -> &'static str {
        match self {
            CiderVariant::Plain => "CIDEr",
            CiderVariant::CiderD => "CIDEr-D",
        }
    }
}

/// Document frequencies per n-gram order over a reference corpus.
/// `idf(g) = ln(M / df(g))`; an n-gram no video contains is treated as
/// `df = 1`.
#[derive(Clone, Debug)]
pub struct IdfTable<T: Hash + Eq> {
    df: [FixedMap<Vec<T>, usize>; MAX_N],
    corpus_size: usize,
}

impl<T: Hash + Eq + Clone> IdfTable<T> {
    pub fn build(corpus: &[CaptionSet<T>]) -> Self {
        let mut df: [FixedMap<Vec<T>, usize>; MAX_N] = Default::default();
        for set in corpus {
            for (n, table) in df.iter_mut().enumerate() {
                let mut seen: HashSet<Vec<T>> = HashSet::new();
                for r in &set.refs {
                    seen.extend(ngram_counts(r, n + 1).into_keys());
                }
                for g in seen {
                    *table.entry(g).or_insert(0) += 1;
                }
            }
        }
        Self {
            df,
            corpus_size: corpus.len(),
        }
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn df(&self, gram: &[T]) -> usize {
        let n = gram.len();
        if n == 0 || n > MAX_N {
            return 0;
        }
        self.df[n - 1].get(gram).copied().unwrap_or(0)
    }

    pub fn idf(&self, gram: &[T]) -> f64 {
        if self.corpus_size == 0 {
            return 0.0;
        }
        let df = self.df(gram).max(1);
        (self.corpus_size as f64 / df as f64).ln()
    }

    fn tfidf(&self, tokens: &[T], n: usize, normalize_tf: bool) -> FixedMap<Vec<T>, f64> {
        let counts = ngram_counts(tokens, n);
        let total: usize = counts.values().sum();
        counts
            .into_iter()
            .map(|(g, c)| {
                let tf = if normalize_tf { c as f64 / total as f64 } else { c as f64 };
                let w = tf * self.idf(&g);
                (g, w)
            })
            .collect()
    }
}

fn norm<K>(v: &FixedMap<K, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

/// CIDEr of one candidate against one video's references, in `[0, 10]`.
/// Degenerate inputs (empty candidate, zero TF-IDF vectors) score 0.
pub fn cider<T: Hash + Eq + Clone>(
    candidate: &[T],
    refs: &CaptionSet<T>,
    idf: &IdfTable<T>,
    variant: CiderVariant,
) -> f64 {
    if candidate.is_empty() || refs.refs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for n in 1..=MAX_N {
        let cand = idf.tfidf(candidate, n, variant == CiderVariant::Plain);
        let cand_norm = norm(&cand);
        let mut per_ref = 0.0;
        for r in &refs.refs {
            let rv = idf.tfidf(r, n, variant == CiderVariant::Plain);
            let rn = norm(&rv);
            if cand_norm == 0.0 || rn == 0.0 {
                continue;
            }
            let sim = match variant {
                CiderVariant::Plain => {
                    cand.iter().map(|(g, w)| w * rv.get(g).copied().unwrap_or(0.0)).sum::<f64>()
                        / (cand_norm * rn)
                }
                CiderVariant::CiderD => {
                    let overlap: f64 = cand
                        .iter()
                        .filter_map(|(g, w)| rv.get(g).map(|x| w.min(*x) * x))
                        .sum();
                    let delta = candidate.len() as f64 - r.len() as f64;
                    overlap / (cand_norm * rn) * (-(delta * delta) / (2.0 * 36.0)).exp()
                }
            };
            per_ref += sim;
        }
        total += per_ref / refs.refs.len() as f64;
    }
    (10.0 * total / MAX_N as f64).clamp(0.0, 10.0)
}
