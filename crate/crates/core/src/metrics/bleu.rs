use std::hash::Hash;

use super::{ngram_counts, MAX_N};

/// Corpus-level BLEU-4: clipped n-gram precisions pooled over the corpus,
/// uniform weights, closest-reference brevity penalty, no smoothing.
pub fn bleu4<T: Hash + Eq + Clone>(candidates: &[Vec<T>], refsets: &[Vec<Vec<T>>]) -> f64 {
    assert_eq!(candidates.len(), refsets.len(), "candidate/reference lists must align");
    let mut matched = [0usize; MAX_N];
    let mut possible = [0usize; MAX_N];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(refsets) {
        cand_len += cand.len();
        // closest reference length, shorter one on ties
        if let Some(best) = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as isize - cand.len() as isize).unsigned_abs(), l))
        {
            ref_len += best;
        }
        for n in 1..=MAX_N {
            let counts = ngram_counts(cand, n);
            let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
            for (g, c) in counts {
                let max_ref = ref_counts.iter().map(|rc| rc.get(&g).copied().unwrap_or(0)).max().unwrap_or(0);
                matched[n - 1] += c.min(max_ref);
                possible[n - 1] += c;
            }
        }
    }

    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_N {
        if matched[n] == 0 || possible[n] == 0 {
            return 0.0;
        }
        log_sum += (matched[n] as f64 / possible[n] as f64).ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    bp * (log_sum / MAX_N as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn exact_match_is_one() {
        let c = vec![w("a dog is running fast"), w("the cat sat down")];
        let r = vec![vec![w("a dog is running fast")], vec![w("the cat sat down")]];
        assert!((bleu4(&c, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_is_zero() {
        assert_eq!(bleu4(&[w("x y z w")], &[vec![w("a b c d")]]), 0.0);
    }

    #[test]
    fn missing_four_gram_is_zero() {
        // p1 = 3/4, p2 = 2/3, p3 = 1/2, p4 = 0
        assert_eq!(bleu4(&[w("a b c d")], &[vec![w("a b c e")]]), 0.0);
    }

    #[test]
    fn clipping_and_brevity() {
        // 5-token candidate against a 6-token reference: all n-grams match
        let c = vec![w("a b c d e")];
        let r = vec![vec![w("a b c d e f")]];
        let expected = (1.0f64 - 6.0 / 5.0).exp();
        assert!((bleu4(&c, &r) - expected).abs() < 1e-12);
        // repeated word is clipped to the reference count
        let c = vec![w("the the the the the")];
        let r = vec![vec![w("the cat the")]];
        assert_eq!(bleu4(&c, &r), 0.0);
    }
}
