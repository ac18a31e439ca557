use std::time::Instant;

use crate::error::Result;
use crate::harness::Video;
use crate::metrics::CaptionSet;
use crate::numerics::{AdamState, Rng};
use crate::picknet::PickNetParams;
use crate::rewards::RewardEnv;
use crate::seq2seq::{Seq2SeqParams, XentOutcome};
use crate::text::TokenId;

use super::reinforce::{is_better, reinforce_step, validate_policy, ReinforceUpdate};
use super::supervision::supervision_step;
use super::{EpochStats, Stage, TrainConfig, TrainStats, TrainingData};

#[derive(Clone, Debug)]
pub struct AdaptStep {
    pub update: ReinforceUpdate,
    pub xent: XentOutcome,
    /// XE gradient for every frame of the video; zero rows for frames that
    /// were not picked.
    pub frame_grads: Vec<Vec<f64>>,
}

/// Policy-gradient step for PickNet, then a cross-entropy step for the
/// captioner on the sampled picks, which enter as fixed inputs.
#[allow(clippy::too_many_arguments)]
pub fn adapt_step(
    video: &Video,
    refs: &CaptionSet<String>,
    captions: &[Vec<TokenId>],
    picknet: &mut PickNetParams,
    seq2seq: &mut Seq2SeqParams,
    cfg: &TrainConfig,
    vocab: &crate::text::Vocabulary,
    idf: &crate::metrics::IdfTable<String>,
    policy_scale: f64,
    xent_scale: f64,
    policy_rng: &mut Rng,
    xent_rng: &mut Rng,
) -> Result<AdaptStep> {
    let mut reward = cfg.reward.clone();
    reward.n_max = reward.tau;
    let update = {
        let env = RewardEnv {
            seq2seq,
            vocab,
            idf,
            cfg: &reward,
        };
        reinforce_step(video, refs, picknet, env, cfg.baseline, policy_scale, policy_rng)?
    };
    let picks = &update.sampled.picks;
    let xent = supervision_step(seq2seq, &video.picked_features(picks), captions, cfg.ss_end, xent_scale, xent_rng)?;
    let mut frame_grads = vec![vec![0.0; video.features[0].len()]; video.n_frames()];
    for (&i, g) in picks.iter().zip(&xent.feature_grads) {
        frame_grads[i] = g.clone();
    }
    Ok(AdaptStep {
        update,
        xent,
        frame_grads,
    })
}

/// Joint fine-tuning of both networks at the adaptation learning rate.
pub fn train_adaptation(
    data: &TrainingData,
    mut picknet: PickNetParams,
    mut seq2seq: Seq2SeqParams,
    cfg: &TrainConfig,
) -> Result<(PickNetParams, Seq2SeqParams, TrainStats)> {
    cfg.validate()?;
    let base = Rng::with_stream(cfg.seed, Stage::Adaptation.stream());
    let mut policy_rng = base.derive(1);
    let mut xent_rng = base.derive(2);
    let mut order_rng = base.derive(3);
    let mut policy_adam = AdamState::new(&picknet, cfg.adam(Stage::Adaptation));
    let mut seq_adam = AdamState::new(&seq2seq, cfg.adam(Stage::Adaptation));
    let batch = data.batch_size(cfg.batch_size);
    let mut reward = cfg.reward.clone();
    reward.n_max = reward.tau;
    let mut stats = TrainStats::default();
    let mut best: Option<(PickNetParams, Seq2SeqParams)> = None;
    let mut best_in_range = false;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..cfg.epochs_adaptation {
        let started = Instant::now();
        order_rng.shuffle(&mut order);
        let (mut total_reward, mut total_picks, mut loss, mut captions) = (0.0, 0usize, 0.0, 0usize);
        for chunk in order.chunks(batch) {
            let n_caps: usize = chunk.iter().map(|&i| data.train_tokens[i].len()).sum();
            let policy_scale = 1.0 / chunk.len() as f64;
            let xent_scale = 1.0 / n_caps.max(1) as f64;
            for &i in chunk {
                let step = adapt_step(
                    data.train[i],
                    &data.train_refs[i],
                    &data.train_tokens[i],
                    &mut picknet,
                    &mut seq2seq,
                    cfg,
                    &data.vocab,
                    &data.reward_idf,
                    policy_scale,
                    xent_scale,
                    &mut policy_rng,
                    &mut xent_rng,
                )?;
                total_reward += step.update.sampled_reward.reward;
                total_picks += step.update.sampled.n_picked();
                loss += step.xent.loss;
            }
            captions += n_caps;
            policy_adam.step(&mut picknet)?;
            seq_adam.step(&mut seq2seq)?;
        }
        let n = data.train.len() as f64;
        let mut e = EpochStats::new(Stage::Adaptation, epoch);
        e.loss_x = Some(loss / captions.max(1) as f64);
        e.loss_r = Some(-total_reward / n);
        e.mean_n_p = Some(total_picks as f64 / n);
        e.n_max = Some(reward.n_max);
        validate_policy(data, &picknet, &seq2seq, &reward, &mut e)?;
        let (better, in_range) = is_better(&e, &reward, &stats, best.is_some(), best_in_range);
        if better {
            stats.best_val_cider = e.val_cider;
            stats.best_epoch = epoch;
            best_in_range = in_range;
            best = Some((picknet.clone(), seq2seq.clone()));
        }
        stats.push(e, started, data.verbose);
    }
    let (p, s) = best.unwrap_or((picknet, seq2seq));
    Ok((p, s, stats))
}
