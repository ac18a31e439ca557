pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure with beta = 1.2, maximized over references.
pub fn rouge_l<T: PartialEq>(candidate: &[T], refs: &[Vec<T>]) -> f64 {
    refs.iter()
        .map(|r| {
            let lcs = lcs_len(candidate, r) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / candidate.len() as f64;
            let rec = lcs / r.len() as f64;
            let b2 = ROUGE_BETA * ROUGE_BETA;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn examples() {
        assert!((rouge_l(&w("a b c d"), &[w("a b c d")]) - 1.0).abs() < 1e-15);
        assert_eq!(rouge_l(&w("a b"), &[w("c d")]), 0.0);
        assert_eq!(lcs_len(&w("a b c d"), &w("a b c e")), 3);
        assert!((rouge_l(&w("a b c d"), &[w("a b c e")]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn best_reference_wins() {
        let s = rouge_l(&w("a b c d"), &[w("x y"), w("a b c d")]);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(rouge_l::<&str>(&[], &[w("a")]), 0.0);
    }
}
