use crate::error::{Error, Result};
use crate::numerics::Rng;

const MAX_ITERS: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the first frame and every other frame with probability 1/2.
pub fn random_pick(n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Usage("random_pick needs at least one frame".into()));
    }
    Ok((0..n).filter(|&i| i == 0 || rng.bernoulli(0.5)).collect())
}

/// k-means++ seeding, then Lloyd iterations (at most 100). Returns for each
/// centroid the nearest frame, lowest index on ties, never reusing a frame;
/// sorted ascending.
pub fn kmeans_pick(features: &[&[f64]], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = features.len();
    if k == 0 || k > n {
        return Err(Error::Usage(format!("k = {k} out of range for {n} frames")));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::shape("kmeans features", dim, bad.len()));
    }
    let mut centroids: Vec<Vec<f64>> = vec![features[rng.below(n)].to_vec()];
    let mut d2: Vec<f64> = features.iter().map(|f| sq_dist(f, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.push(features[next].to_vec());
        for (i, f) in features.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(f, &centroids[centroids.len() - 1]));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (i, f) in features.iter().enumerate() {
            let best = nearest(f, &centroids);
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = (0..n).filter(|&i| assign[i] == c).map(|i| features[i]).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in centroid.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
    }

    let mut used = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    for centroid in &centroids {
        let mut best: Option<(f64, usize)> = None;
        for (i, f) in features.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = sq_dist(f, centroid);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("k <= n leaves a free frame");
        used[i] = true;
        picks.push(i);
    }
    picks.sort_unstable();
    Ok(picks)
}

fn nearest(f: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(f, centroid);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}
