use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::numerics::Rng;
use crate::picknet::PickNetParams;
use crate::rewards::{calibrate_lambda_v, RewardConfig};
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqParams};
use crate::text::Vocabulary;

use super::{
    train_adaptation, train_reinforcement, train_supervision, Stage, TrainConfig, TrainStats, TrainingData,
};

/// Network sizes and text settings shared by all stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_hidden")]
    pub picknet_hidden: usize,
    #[serde(default)]
    pub standard_output_gate: bool,
    #[serde(default = "default_retain")]
    pub retain_prob: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_min_freq")]
    pub min_freq: usize,
}

fn default_embed() -> usize {
    32
}

fn default_hidden() -> usize {
    64
}

fn default_retain() -> f64 {
    0.5
}

fn default_max_len() -> usize {
    20
}

fn default_min_freq() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: default_embed(),
            hidden_dim: default_hidden(),
            picknet_hidden: default_hidden(),
            standard_output_gate: false,
            retain_prob: default_retain(),
            max_len: default_max_len(),
            min_freq: default_min_freq(),
        }
    }
}

impl ModelConfig {
    pub fn seq2seq(&self, feature_dim: usize, vocab_size: usize) -> Seq2SeqConfig {
        Seq2SeqConfig {
            feature_dim,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            vocab_size,
            standard_output_gate: self.standard_output_gate,
            retain_prob: self.retain_prob,
            max_len: self.max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.picknet_hidden == 0 {
            return Err(Error::Config("picknet_hidden must be positive".into()));
        }
        if self.min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        self.seq2seq(1, 4).validate()
    }

    pub fn init_seq2seq(&self, feature_dim: usize, vocab_size: usize, seed: u64) -> Result<Seq2SeqParams> {
        Seq2SeqParams::new(self.seq2seq(feature_dim, vocab_size), &mut Rng::with_stream(seed, 201))
    }

    pub fn init_picknet(&self, seed: u64) -> PickNetParams {
        PickNetParams::new(self.picknet_hidden, &mut Rng::with_stream(seed, 202))
    }
}

/// Reward settings with `lambda_v` calibrated on the training split when
/// requested.
pub fn resolve_reward(data: &TrainingData, cfg: &TrainConfig) -> Result<RewardConfig> {
    let mut reward = cfg.reward.clone();
    if cfg.calibrate_lambda_v && reward.lambda_v > 0.0 {
        let feats: Vec<&[Vec<f64>]> = data.train.iter().map(|v| v.features.as_slice()).collect();
        reward.lambda_v = calibrate_lambda_v(&feats, reward.lambda_v, &mut Rng::with_stream(cfg.seed, 301), 4)?;
    }
    Ok(reward)
}

pub struct PipelineOutput {
    pub vocab: Vocabulary,
    /// Reward settings actually used, after calibration.
    pub reward: RewardConfig,
    pub supervised: Seq2SeqParams,
    pub reinforced: PickNetParams,
    pub adapted_seq2seq: Seq2SeqParams,
    pub adapted_picknet: PickNetParams,
    pub stats: Vec<(Stage, TrainStats)>,
}

/// Supervision, then reinforcement, then adaptation, each stage starting
/// from the best model of the previous one.
pub fn run_pipeline(dataset: &Dataset, model: &ModelConfig, cfg: &TrainConfig, verbose: bool) -> Result<PipelineOutput> {
    model.validate()?;
    cfg.validate()?;
    let mut data = TrainingData::new(dataset, model.min_freq)?;
    data.verbose = verbose;
    let seq = model.init_seq2seq(dataset.feature_dim, data.vocab.len(), cfg.seed)?;
    let (supervised, sup_stats) = train_supervision(&data, seq, cfg)?;

    let reward = resolve_reward(&data, cfg)?;
    let rl_cfg = TrainConfig {
        reward: reward.clone(),
        ..cfg.clone()
    };
    let (reinforced, rl_stats) = train_reinforcement(&data, model.init_picknet(cfg.seed), &supervised, &rl_cfg)?;
    let (adapted_picknet, adapted_seq2seq, ad_stats) =
        train_adaptation(&data, reinforced.clone(), supervised.clone(), &rl_cfg)?;
    Ok(PipelineOutput {
        vocab: data.vocab,
        reward,
        supervised,
        reinforced,
        adapted_seq2seq,
        adapted_picknet,
        stats: vec![
            (Stage::Supervision, sup_stats),
            (Stage::Reinforcement, rl_stats),
            (Stage::Adaptation, ad_stats),
        ],
    })
}
