use picknet::numerics::Rng;

fn grams(s: &[String], n: usize) -> Vec<Vec<String>> {
    if s.len() < n {
        return Vec::new();
    }
    s.windows(n).map(|w| w.to_vec()).collect()
}

/// CIDEr by direct enumeration: document frequency by rescanning every
/// video's references, TF-IDF vectors over an explicit basis, plain cosine.
pub fn cider_oracle(candidate: &[String], video: usize, corpus: &[Vec<Vec<String>>]) -> f64 {
    let refs = &corpus[video];
    if candidate.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let m = corpus.len() as f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let mut basis: Vec<Vec<String>> = Vec::new();
        for s in std::iter::once(candidate).chain(refs.iter().map(|r| r.as_slice())) {
            for g in grams(s, n) {
                if !basis.contains(&g) {
                    basis.push(g);
                }
            }
        }
        let idf: Vec<f64> = basis
            .iter()
            .map(|g| {
                let df = corpus.iter().filter(|rs| rs.iter().any(|r| grams(r, n).contains(g))).count();
                (m / df.max(1) as f64).ln()
            })
            .collect();
        let vector = |s: &[String]| -> Vec<f64> {
            let gs = grams(s, n);
            basis
                .iter()
                .zip(&idf)
                .map(|(b, w)| {
                    if gs.is_empty() {
                        0.0
                    } else {
                        gs.iter().filter(|g| *g == b).count() as f64 / gs.len() as f64 * w
                    }
                })
                .collect()
        };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = vector(candidate);
        let mut sum = 0.0;
        for r in refs {
            let rv = vector(r);
            let (cn, rn) = (norm(&c), norm(&rv));
            if cn > 0.0 && rn > 0.0 {
                sum += c.iter().zip(&rv).map(|(a, b)| a * b).sum::<f64>() / (cn * rn);
            }
        }
        total += sum / refs.len() as f64;
    }
    10.0 * total / 4.0
}

/// Up to 5 videos with 1..=3 references of 1..=8 tokens over a small
/// vocabulary, plus one candidate per video (sometimes a copy of a reference,
/// sometimes empty).
pub fn micro_corpus(rng: &mut Rng) -> (Vec<Vec<Vec<String>>>, Vec<Vec<String>>) {
    const WORDS: [&str; 7] = ["a", "man", "dog", "is", "running", "on", "grass"];
    let sentence = |rng: &mut Rng, len: usize| -> Vec<String> {
        (0..len).map(|_| WORDS[rng.below(WORDS.len())].to_string()).collect()
    };
    let videos = 1 + rng.below(5);
    let corpus: Vec<Vec<Vec<String>>> = (0..videos)
        .map(|_| {
            let k = 1 + rng.below(3);
            (0..k).map(|_| {
                let len = 1 + rng.below(8);
                sentence(rng, len)
            }).collect()
        })
        .collect();
    let candidates = corpus
        .iter()
        .map(|refs| match rng.below(5) {
            0 => refs[rng.below(refs.len())].clone(),
            1 => Vec::new(),
            _ => {
                let len = 1 + rng.below(8);
                sentence(rng, len)
            }
        })
        .collect();
    (corpus, candidates)
}
