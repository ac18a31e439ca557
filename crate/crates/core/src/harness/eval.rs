use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{bleu4, cider, rouge_l, CaptionSet, CiderVariant, IdfTable};
use crate::numerics::Rng;
use crate::picknet::{run_episode, EpisodeMode, EpisodeRecord, PickNetParams};
use crate::seq2seq::{encode_sequence, greedy_decode, Seq2SeqParams};
use crate::text::{tokenize, Vocabulary};

use super::baselines::{kmeans_pick, random_pick};
use super::dataset::{Dataset, Split, Video};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickPolicy {
    PickNet,
    Random,
    KMeans,
    All,
}

impl PickPolicy {
    pub fn name(self) -> &'static str {
        match self {
            PickPolicy::PickNet => "picknet",
            PickPolicy::Random => "random",
            PickPolicy::KMeans => "kmeans",
            PickPolicy::All => "all",
        }
    }
}

impl std::str::FromStr for PickPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picknet" => Ok(PickPolicy::PickNet),
            "random" => Ok(PickPolicy::Random),
            "kmeans" => Ok(PickPolicy::KMeans),
            "all" => Ok(PickPolicy::All),
            other => Err(Error::Usage(format!("unknown pick policy {other:?}"))),
        }
    }
}

/// Corpus-level scores of a set of candidate captions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

/// BLEU-4 over the corpus, mean ROUGE-L and mean CIDEr with IDF taken from
/// the given references.
pub fn score_captions(candidates: &[Vec<String>], refs: &[CaptionSet<String>], variant: CiderVariant) -> Result<Scores> {
    if candidates.len() != refs.len() {
        return Err(Error::shape("candidate captions", refs.len(), candidates.len()));
    }
    if refs.is_empty() {
        return Err(Error::Usage("nothing to score".into()));
    }
    let idf = IdfTable::build(refs);
    let n = refs.len() as f64;
    let refsets: Vec<Vec<Vec<String>>> = refs.iter().map(|r| r.refs.clone()).collect();
    Ok(Scores {
        bleu4: bleu4(candidates, &refsets),
        rouge_l: candidates.iter().zip(refs).map(|(c, r)| rouge_l(c, &r.refs)).sum::<f64>() / n,
        cider: candidates.iter().zip(refs).map(|(c, r)| cider(c, r, &idf, variant)).sum::<f64>() / n,
    })
}

/// Greedy caption from the given frame subset, as words.
pub fn caption_words(video: &Video, picks: &[usize], params: &Seq2SeqParams, vocab: &Vocabulary) -> Result<Vec<String>> {
    let v = encode_sequence(&video.picked_features(picks), params)?;
    let ids = greedy_decode(&v, &params.gru, params.config.max_len)?;
    ids.iter().map(|&w| vocab.token(w).map(str::to_owned)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub policy: PickPolicy,
    /// Cluster count for k-means; defaults to the mean greedy pick count.
    #[serde(default)]
    pub kmeans_k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cider_variant: CiderVariant,
    #[serde(default)]
    pub per_video: bool,
}

impl EvalOptions {
    pub fn new(policy: PickPolicy) -> Self {
        Self {
            policy,
            kmeans_k: None,
            seed: 0,
            cider_variant: CiderVariant::Plain,
            per_video: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoResult {
    pub video: String,
    pub picks: Vec<usize>,
    pub caption: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: PickPolicy,
    pub split: Split,
    pub videos: usize,
    pub cider_variant: CiderVariant,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub mean_n_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_video: Option<Vec<VideoResult>>,
}

/// Greedy PickNet picks for each video of a split.
pub fn greedy_episodes(videos: &[&Video], picknet: &PickNetParams) -> Result<Vec<EpisodeRecord>> {
    let mut rng = Rng::new(0);
    videos
        .iter()
        .map(|v| Ok(run_episode(&v.glances, picknet, EpisodeMode::Greedy, &mut rng)?.record(v.id())))
        .collect()
}

/// Mean greedy pick count, rounded, used as the k-means cluster count.
pub fn mean_greedy_picks(videos: &[&Video], picknet: &PickNetParams) -> Result<usize> {
    let eps = greedy_episodes(videos, picknet)?;
    let mean = eps.iter().map(|e| e.picks.len()).sum::<usize>() as f64 / eps.len().max(1) as f64;
    Ok((mean.round() as usize).max(1))
}

pub fn evaluate_split(
    dataset: &Dataset,
    split: Split,
    params: &Seq2SeqParams,
    vocab: &Vocabulary,
    picknet: Option<&PickNetParams>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let videos = dataset.split(split);
    if videos.is_empty() {
        return Err(Error::Usage(format!("split {} is empty", split.name())));
    }
    let need_picknet = || picknet.ok_or_else(|| Error::Usage(format!("policy {} needs PickNet weights", opts.policy.name())));
    let picks: Vec<Vec<usize>> = match opts.policy {
        PickPolicy::All => videos.iter().map(|v| (0..v.n_frames()).collect()).collect(),
        PickPolicy::PickNet => greedy_episodes(&videos, need_picknet()?)?.into_iter().map(|e| e.picks).collect(),
        PickPolicy::Random => {
            let base = Rng::with_stream(opts.seed, 11);
            videos
                .iter()
                .enumerate()
                .map(|(i, v)| random_pick(v.n_frames(), &mut base.derive(i as u64)))
                .collect::<Result<_>>()?
        }
        PickPolicy::KMeans => {
            let k = match opts.kmeans_k {
                Some(k) => k,
                None => mean_greedy_picks(&videos, need_picknet()?)?,
            };
            let base = Rng::with_stream(opts.seed, 12);
            videos
                .iter()
                .enumerate()
                .map(|(i, v)| kmeans_pick(&v.feature_refs(), k.min(v.n_frames()), &mut base.derive(i as u64)))
                .collect::<Result<_>>()?
        }
    };
    let mut candidates = Vec::with_capacity(videos.len());
    let mut refs = Vec::with_capacity(videos.len());
    for (v, p) in videos.iter().zip(&picks) {
        candidates.push(caption_words(v, p, params, vocab)?);
        refs.push(v.references());
    }
    let scores = score_captions(&candidates, &refs, opts.cider_variant)?;
    let per_video = opts.per_video.then(|| {
        videos
            .iter()
            .zip(&picks)
            .zip(&candidates)
            .map(|((v, p), c)| VideoResult {
                video: v.id().to_owned(),
                picks: p.clone(),
                caption: c.join(" "),
            })
            .collect()
    });
    Ok(EvalReport {
        policy: opts.policy,
        split,
        videos: videos.len(),
        cider_variant: opts.cider_variant,
        bleu4: scores.bleu4,
        rouge_l: scores.rouge_l,
        cider: scores.cider,
        mean_n_p: picks.iter().map(Vec::len).sum::<usize>() as f64 / videos.len() as f64,
        per_video,
    })
}

/// Scores the scene-reading captioner on a split of a synthetic dataset.
pub fn evaluate_oracle(dataset: &Dataset, split: Split) -> Result<Scores> {
    let videos = dataset.split(split);
    let candidates: Vec<Vec<String>> = videos
        .iter()
        .map(|v| Ok(tokenize(&super::synthetic::oracle_caption(&v.record.scenes)?)))
        .collect::<Result<_>>()?;
    let refs: Vec<CaptionSet<String>> = videos.iter().map(|v| v.references()).collect();
    score_captions(&candidates, &refs, CiderVariant::Plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(id: &str, refs: &[&str]) -> CaptionSet<String> {
        CaptionSet::new(id, refs.iter().map(|r| tokenize(r)).collect())
    }

    #[test]
    fn references_as_candidates_hit_the_ceiling() {
        let refs = vec![
            set("a", &["a man is riding a bike", "a man rides a bike"]),
            set("b", &["a cat is eating an apple", "the cat eats an apple"]),
            set("c", &["two dogs are playing", "dogs play together outside"]),
        ];
        let cands: Vec<Vec<String>> = refs.iter().map(|r| r.refs[0].clone()).collect();
        let s = score_captions(&cands, &refs, CiderVariant::Plain).unwrap();
        assert!((s.bleu4 - 1.0).abs() < 1e-12);
        assert!((s.rouge_l - 1.0).abs() < 1e-12);
        assert!(s.cider > 5.0);
        let all_same: Vec<CaptionSet<String>> = refs
            .iter()
            .map(|r| CaptionSet::new(r.video_id.clone(), vec![r.refs[0].clone()]))
            .collect();
        let s = score_captions(&cands, &all_same, CiderVariant::Plain).unwrap();
        assert!((s.cider - 10.0).abs() < 1e-9);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [PickPolicy::PickNet, PickPolicy::Random, PickPolicy::KMeans, PickPolicy::All] {
            assert_eq!(p.name().parse::<PickPolicy>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
        }
        assert!("uniform".parse::<PickPolicy>().is_err());
    }
}
