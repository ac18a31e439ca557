//! Three-stage training: cross-entropy supervision of the captioner,
//! REINFORCE on the pick policy against the frozen captioner, and joint
//! adaptation with picks treated as fixed inputs.

mod adaptation;
mod pipeline;
mod reinforce;
mod supervision;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{score_captions, Dataset, Split, Video};
use crate::metrics::{CaptionSet, CiderVariant, IdfTable};
use crate::numerics::AdamConfig;
use crate::rewards::RewardConfig;
use crate::seq2seq::Seq2SeqParams;
use crate::text::{tokenize, TokenId, Vocabulary, EOS};

pub use adaptation::{adapt_step, train_adaptation, AdaptStep};
pub use pipeline::{resolve_reward, run_pipeline, ModelConfig, PipelineOutput};
pub use reinforce::{reinforce_step, reinforce_step_with, train_reinforcement, ReinforceUpdate};
pub use supervision::{supervision_step, train_supervision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "supervision")]
    Supervision,
    #[serde(rename = "reinforce")]
    Reinforcement,
    #[serde(rename = "adapt")]
    Adaptation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Supervision => "supervision",
            Stage::Reinforcement => "reinforce",
            Stage::Adaptation => "adapt",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Stage::Supervision => 101,
            Stage::Reinforcement => 102,
            Stage::Adaptation => 103,
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supervision" => Ok(Stage::Supervision),
            "reinforce" | "reinforcement" => Ok(Stage::Reinforcement),
            "adapt" | "adaptation" => Ok(Stage::Adaptation),
            other => Err(Error::Usage(format!("unknown stage {other:?}"))),
        }
    }
}

/// Baseline subtracted from the sampled episode's reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Reward of the greedy episode.
    #[default]
    SelfCritical,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Set from the run config's top-level seed; not part of the JSON form.
    #[serde(skip)]
    pub seed: u64,
    #[serde(default = "default_lr_sup")]
    pub lr_supervision: f64,
    #[serde(default = "default_lr_rl")]
    pub lr_reinforcement: f64,
    #[serde(default = "default_lr_adapt")]
    pub lr_adaptation: f64,
    /// Videos per update; shrunk to the training split size when larger.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs_supervision: usize,
    #[serde(default = "default_epochs")]
    pub epochs_reinforcement: usize,
    #[serde(default = "default_epochs")]
    pub epochs_adaptation: usize,
    /// Scheduled-sampling feedback probability at the first and last epoch.
    #[serde(default)]
    pub ss_start: f64,
    #[serde(default = "default_ss_end")]
    pub ss_end: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
    #[serde(default)]
    pub reward: RewardConfig,
    /// Replace `reward.lambda_v` by `reward.lambda_v / E[r_v]` under random picks.
    #[serde(default = "default_true")]
    pub calibrate_lambda_v: bool,
    #[serde(default)]
    pub baseline: Baseline,
}

fn default_lr_sup() -> f64 {
    3e-4
}

fn default_lr_rl() -> f64 {
    3e-4
}

fn default_lr_adapt() -> f64 {
    1e-4
}

fn default_batch() -> usize {
    128
}

fn default_epochs() -> usize {
    100
}

fn default_ss_end() -> f64 {
    0.25
}

fn default_clip() -> Option<f64> {
    Some(5.0)
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lr_supervision: default_lr_sup(),
            lr_reinforcement: default_lr_rl(),
            lr_adaptation: default_lr_adapt(),
            batch_size: default_batch(),
            epochs_supervision: default_epochs(),
            epochs_reinforcement: default_epochs(),
            epochs_adaptation: default_epochs(),
            ss_start: 0.0,
            ss_end: default_ss_end(),
            clip_norm: default_clip(),
            reward: RewardConfig::default(),
            calibrate_lambda_v: true,
            baseline: Baseline::SelfCritical,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [
            ("lr_supervision", self.lr_supervision),
            ("lr_reinforcement", self.lr_reinforcement),
            ("lr_adaptation", self.lr_adaptation),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, e) in [
            ("epochs_supervision", self.epochs_supervision),
            ("epochs_reinforcement", self.epochs_reinforcement),
            ("epochs_adaptation", self.epochs_adaptation),
        ] {
            if e == 0 || e > 100 {
                return Err(Error::Config(format!("{name} must be in 1..=100, got {e}")));
            }
        }
        for p in [self.ss_start, self.ss_end] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("scheduled-sampling probability {p} not in [0, 1]")));
            }
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        self.reward.validate()
    }

    pub fn lr(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Supervision => self.lr_supervision,
            Stage::Reinforcement => self.lr_reinforcement,
            Stage::Adaptation => self.lr_adaptation,
        }
    }

    pub fn epochs(&self, stage: Stage) -> usize {
        match stage {
            Stage::Supervision => self.epochs_supervision,
            Stage::Reinforcement => self.epochs_reinforcement,
            Stage::Adaptation => self.epochs_adaptation,
        }
    }

    pub(crate) fn adam(&self, stage: Stage) -> AdamConfig {
        AdamConfig {
            lr: self.lr(stage),
            clip_norm: self.clip_norm,
            ..AdamConfig::default()
        }
    }

    /// Feedback probability for an epoch, linear between the endpoints.
    pub fn feedback_prob(&self, epoch: usize) -> f64 {
        let last = self.epochs_supervision.saturating_sub(1);
        if last == 0 {
            return self.ss_start;
        }
        self.ss_start + (self.ss_end - self.ss_start) * epoch.min(last) as f64 / last as f64
    }
}

/// One line of the training log. Equality ignores `wall_time`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub stage: Stage,
    pub epoch: usize,
    /// Mean cross-entropy per caption.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_x: Option<f64>,
    /// Negative mean sampled-episode reward.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_r: Option<f64>,
    /// Mean pick count of sampled training episodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_n_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback_prob: Option<f64>,
    pub val_cider: f64,
    /// Mean greedy-episode reward on the validation split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_n_p: Option<f64>,
    /// Seconds spent on the epoch; kept out of serialized logs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl PartialEq for EpochStats {
    fn eq(&self, other: &Self) -> bool {
        self.stage == other.stage
            && self.epoch == other.epoch
            && self.loss_x == other.loss_x
            && self.loss_r == other.loss_r
            && self.mean_n_p == other.mean_n_p
            && self.n_max == other.n_max
            && self.feedback_prob == other.feedback_prob
            && self.val_cider == other.val_cider
            && self.val_reward == other.val_reward
            && self.val_n_p == other.val_n_p
    }
}

impl EpochStats {
    fn new(stage: Stage, epoch: usize) -> Self {
        Self {
            stage,
            epoch,
            loss_x: None,
            loss_r: None,
            mean_n_p: None,
            n_max: None,
            feedback_prob: None,
            val_cider: 0.0,
            val_reward: None,
            val_n_p: None,
            wall_time: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_cider: f64,
}

impl TrainStats {
    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    fn push(&mut self, mut e: EpochStats, started: Instant, verbose: bool) {
        e.wall_time = started.elapsed().as_secs_f64();
        if verbose {
            eprintln!(
                "[{}] epoch {:>3}  loss_x {}  reward {}  n_p {}  val_cider {:.4}  ({:.1}s)",
                e.stage.name(),
                e.epoch,
                e.loss_x.map_or("-".into(), |v| format!("{v:.4}")),
                e.loss_r.map_or("-".into(), |v| format!("{:.4}", -v)),
                e.val_n_p.map_or("-".into(), |v| format!("{v:.2}")),
                e.val_cider,
                e.wall_time
            );
        }
        self.epochs.push(e);
    }
}

/// Training and validation videos with tokenized captions, the vocabulary,
/// and the reward IDF table built from training references only.
pub struct TrainingData<'a> {
    pub vocab: Vocabulary,
    pub train: Vec<&'a Video>,
    pub val: Vec<&'a Video>,
    /// Per training video, each caption as ids ending in EOS.
    pub train_tokens: Vec<Vec<Vec<TokenId>>>,
    pub train_refs: Vec<CaptionSet<String>>,
    pub val_refs: Vec<CaptionSet<String>>,
    pub reward_idf: IdfTable<String>,
    pub verbose: bool,
}

impl<'a> TrainingData<'a> {
    /// Builds the vocabulary from the training captions.
    pub fn new(dataset: &'a Dataset, min_freq: usize) -> Result<Self> {
        let corpus: Vec<Vec<String>> = dataset
            .split(Split::Train)
            .iter()
            .flat_map(|v| v.record.captions.iter().map(|c| tokenize(c)))
            .collect();
        Self::with_vocab(dataset, Vocabulary::build(&corpus, min_freq))
    }

    pub fn with_vocab(dataset: &'a Dataset, vocab: Vocabulary) -> Result<Self> {
        let train = dataset.split(Split::Train);
        let val = dataset.split(Split::Validation);
        if train.is_empty() || val.is_empty() {
            return Err(Error::Config("training needs non-empty train and validation splits".into()));
        }
        let train_tokens = train
            .iter()
            .map(|v| {
                v.record
                    .captions
                    .iter()
                    .map(|c| {
                        let mut ids = vocab.encode(&tokenize(c));
                        ids.push(EOS);
                        ids
                    })
                    .collect()
            })
            .collect();
        let train_refs: Vec<CaptionSet<String>> = train.iter().map(|v| v.references()).collect();
        let val_refs = val.iter().map(|v| v.references()).collect();
        let reward_idf = IdfTable::build(&train_refs);
        Ok(Self {
            vocab,
            train,
            val,
            train_tokens,
            train_refs,
            val_refs,
            reward_idf,
            verbose: false,
        })
    }

    pub fn batch_size(&self, requested: usize) -> usize {
        requested.clamp(1, self.train.len())
    }

    /// Validation CIDEr of greedy captions from the given pick sets.
    pub(crate) fn val_cider(&self, params: &Seq2SeqParams, picks: &[Vec<usize>]) -> Result<f64> {
        let candidates = self
            .val
            .iter()
            .zip(picks)
            .map(|(v, p)| crate::harness::caption_words(v, p, params, &self.vocab))
            .collect::<Result<Vec<_>>>()?;
        Ok(score_captions(&candidates, &self.val_refs, CiderVariant::Plain)?.cider)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feedback_schedule_endpoints() {
        let cfg = TrainConfig {
            epochs_supervision: 11,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.feedback_prob(0), 0.0);
        assert_eq!(cfg.feedback_prob(10), 0.25);
        assert!((cfg.feedback_prob(5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            lr_adaptation: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs_reinforcement: 101,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        let json = r#"{"batch_size": 8, "bogus": 1}"#;
        assert!(serde_json::from_str::<TrainConfig>(json).is_err());
    }

    #[test]
    fn stage_names() {
        for s in [Stage::Supervision, Stage::Reinforcement, Stage::Adaptation] {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
    }
}
