//! Episode rewards: caption quality, visual diversity and pick-count limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{cider, CaptionSet, CiderVariant, IdfTable};
use crate::numerics::Rng;
use crate::seq2seq::{encode_sequence, greedy_decode, Seq2SeqParams};
use crate::text::Vocabulary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    #[serde(default = "default_lambda_l")]
    pub lambda_l: f64,
    #[serde(default = "default_lambda_v")]
    pub lambda_v: f64,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    /// Current pick ceiling; training overwrites it from the schedule.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

fn default_lambda_l() -> f64 {
    1.0
}

fn default_lambda_v() -> f64 {
    0.1
}

fn default_n_min() -> usize {
    3
}

fn default_n_max() -> usize {
    10
}

fn default_tau() -> usize {
    7
}

fn default_penalty() -> f64 {
    -1.0
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_l: default_lambda_l(),
            lambda_v: default_lambda_v(),
            n_min: default_n_min(),
            n_max: default_n_max(),
            tau: default_tau(),
            penalty: default_penalty(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l >= 0.0 && self.lambda_v >= 0.0) {
            return Err(Error::Config("reward weights must be non-negative".into()));
        }
        if !(self.n_min <= self.tau && self.tau <= self.n_max) {
            return Err(Error::Config(format!(
                "pick limits must satisfy n_min <= tau <= n_max, got {} / {} / {}",
                self.n_min, self.tau, self.n_max
            )));
        }
        if !(self.penalty < 0.0) {
            return Err(Error::Config(format!("penalty reward {} must be negative", self.penalty)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_l: f64,
    pub r_v: f64,
    pub n_p: usize,
    pub reward: f64,
    pub limited: bool,
}

/// CIDEr of the caption greedily decoded from the picked frames.
pub fn language_reward(
    picked: &[&[f64]],
    params: &Seq2SeqParams,
    vocab: &Vocabulary,
    refs: &CaptionSet<String>,
    idf: &IdfTable<String>,
) -> Result<f64> {
    let v = encode_sequence(picked, params)?;
    let ids = greedy_decode(&v, &params.gru, params.config.max_len)?;
    let words: Vec<String> = ids.iter().map(|&w| vocab.token(w).map(str::to_owned)).collect::<Result<_>>()?;
    Ok(cider(&words, refs, idf, CiderVariant::Plain))
}

/// Sum over coordinates of the population standard deviation of the picked
/// features.
pub fn visual_diversity(picked: &[&[f64]]) -> f64 {
    let Some(first) = picked.first() else {
        return 0.0;
    };
    let n = picked.len() as f64;
    (0..first.len())
        .map(|j| {
            let mean = picked.iter().map(|x| x[j]).sum::<f64>() / n;
            (picked.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .sum()
}

/// `lambda_l r_l + lambda_v r_v` inside the pick limits, the penalty outside.
pub fn final_reward(r_l: f64, r_v: f64, n_p: usize, cfg: &RewardConfig) -> RewardBreakdown {
    let limited = n_p < cfg.n_min || n_p > cfg.n_max;
    let reward = if limited {
        cfg.penalty
    } else {
        cfg.lambda_l * r_l + cfg.lambda_v * r_v
    };
    RewardBreakdown {
        r_l,
        r_v,
        n_p,
        reward,
        limited,
    }
}

/// Full reward for one pick set. The caption and diversity terms are only
/// computed when the pick count is inside the limits.
pub fn episode_reward(
    features: &[Vec<f64>],
    picks: &[usize],
    params: &Seq2SeqParams,
    vocab: &Vocabulary,
    refs: &CaptionSet<String>,
    idf: &IdfTable<String>,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    let n_p = picks.len();
    if n_p < cfg.n_min || n_p > cfg.n_max {
        return Ok(final_reward(0.0, 0.0, n_p, cfg));
    }
    let picked: Vec<&[f64]> = picks.iter().map(|&i| features[i].as_slice()).collect();
    let r_l = if cfg.lambda_l > 0.0 {
        language_reward(&picked, params, vocab, refs, idf)?
    } else {
        0.0
    };
    let r_v = if cfg.lambda_v > 0.0 { visual_diversity(&picked) } else { 0.0 };
    Ok(final_reward(r_l, r_v, n_p, cfg))
}

/// Frozen captioner plus everything needed to score a pick set.
#[derive(Clone, Copy)]
pub struct RewardEnv<'a> {
    pub seq2seq: &'a Seq2SeqParams,
    pub vocab: &'a Vocabulary,
    pub idf: &'a IdfTable<String>,
    pub cfg: &'a RewardConfig,
}

impl RewardEnv<'_> {
    pub fn reward(&self, features: &[Vec<f64>], picks: &[usize], refs: &CaptionSet<String>) -> Result<RewardBreakdown> {
        episode_reward(features, picks, self.seq2seq, self.vocab, refs, self.idf, self.cfg)
    }
}

/// Pick ceiling for an epoch: linear from `ceil(n/3)` at epoch 0 down to
/// `tau` at `floor(total/2)`, then constant.
pub fn nmax_schedule(epoch: usize, total_epochs: usize, n_frames: usize, tau: usize) -> Result<usize> {
    let start = n_frames.div_ceil(3);
    if tau > start {
        return Err(Error::Config(format!("tau {tau} exceeds the initial pick ceiling {start}")));
    }
    if epoch > total_epochs {
        return Err(Error::Usage(format!("epoch {epoch} beyond total {total_epochs}")));
    }
    let half = total_epochs / 2;
    if epoch >= half {
        return Ok(tau);
    }
    let frac = epoch as f64 / half as f64;
    Ok((start as f64 - frac * (start - tau) as f64).round() as usize)
}

/// `base / E[r_v]` where the expectation is over episodes that keep each
/// frame with probability 1/2 (first frame always kept).
pub fn calibrate_lambda_v(videos: &[&[Vec<f64>]], base: f64, rng: &mut Rng, episodes_per_video: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for feats in videos {
        for _ in 0..episodes_per_video {
            let picked: Vec<&[f64]> = feats
                .iter()
                .enumerate()
                .filter(|(i, _)| *i == 0 || rng.bernoulli(0.5))
                .map(|(_, f)| f.as_slice())
                .collect();
            total += visual_diversity(&picked);
            count += 1;
        }
    }
    if count == 0 || total <= 0.0 {
        return Err(Error::Config("cannot calibrate the diversity weight on featureless data".into()));
    }
    Ok(base / (total / count as f64))
}
