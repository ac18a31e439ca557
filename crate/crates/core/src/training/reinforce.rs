use std::time::Instant;

use crate::error::Result;
use crate::harness::{greedy_episodes, Video};
use crate::metrics::CaptionSet;
use crate::numerics::{AdamState, ParamSet, Rng};
use crate::picknet::{accumulate_reinforce_grad, run_episode_raw, EpisodeMode, EpisodeTrace, PickNetParams};
use crate::rewards::{nmax_schedule, RewardBreakdown, RewardConfig, RewardEnv};
use crate::seq2seq::Seq2SeqParams;

use super::{Baseline, EpochStats, Stage, TrainConfig, TrainStats, TrainingData};

#[derive(Clone, Debug)]
pub struct ReinforceUpdate {
    pub sampled: EpisodeTrace,
    pub greedy: EpisodeTrace,
    pub sampled_reward: RewardBreakdown,
    pub greedy_reward: RewardBreakdown,
    pub baseline: f64,
    /// `r(sampled) - baseline`.
    pub advantage: f64,
    /// Norm of the policy gradients held after this step.
    pub grad_norm: f64,
}

/// One sampled and one greedy episode, both scored by `reward`; the policy
/// gradient of the sampled episode, scaled by its advantage times
/// `grad_scale`, is added to the PickNet gradients.
pub fn reinforce_step_with<F>(
    frames: &[&[f64]],
    picknet: &mut PickNetParams,
    mut reward: F,
    baseline: Baseline,
    grad_scale: f64,
    rng: &mut Rng,
) -> Result<ReinforceUpdate>
where
    F: FnMut(&[usize]) -> Result<RewardBreakdown>,
{
    let sampled = run_episode_raw(frames, picknet, EpisodeMode::Stochastic, rng)?;
    let greedy = run_episode_raw(frames, picknet, EpisodeMode::Greedy, rng)?;
    let sampled_reward = reward(&sampled.picks)?;
    let greedy_reward = if greedy.picks == sampled.picks {
        sampled_reward.clone()
    } else {
        reward(&greedy.picks)?
    };
    let b = match baseline {
        Baseline::SelfCritical => greedy_reward.reward,
        Baseline::None => 0.0,
    };
    let advantage = sampled_reward.reward - b;
    accumulate_reinforce_grad(frames, &sampled, advantage * grad_scale, picknet)?;
    Ok(ReinforceUpdate {
        sampled,
        greedy,
        sampled_reward,
        greedy_reward,
        baseline: b,
        advantage,
        grad_norm: picknet.grad_norm(),
    })
}

/// `reinforce_step_with` using the captioning reward of `env`.
pub fn reinforce_step(
    video: &Video,
    refs: &CaptionSet<String>,
    picknet: &mut PickNetParams,
    env: RewardEnv,
    baseline: Baseline,
    grad_scale: f64,
    rng: &mut Rng,
) -> Result<ReinforceUpdate> {
    let frames: Vec<&[f64]> = video.glances.iter().map(|g| g.pixels()).collect();
    reinforce_step_with(&frames, picknet, |picks| env.reward(&video.features, picks, refs), baseline, grad_scale, rng)
}

/// Greedy picks, CIDEr and mean reward on the validation split.
pub(crate) fn validate_policy(
    data: &TrainingData,
    picknet: &PickNetParams,
    seq2seq: &Seq2SeqParams,
    reward: &RewardConfig,
    e: &mut EpochStats,
) -> Result<()> {
    let eps = greedy_episodes(&data.val, picknet)?;
    let picks: Vec<Vec<usize>> = eps.into_iter().map(|e| e.picks).collect();
    e.val_cider = data.val_cider(seq2seq, &picks)?;
    let env = RewardEnv {
        seq2seq,
        vocab: &data.vocab,
        idf: &data.reward_idf,
        cfg: reward,
    };
    let mut total = 0.0;
    for ((v, r), p) in data.val.iter().zip(&data.val_refs).zip(&picks) {
        total += env.reward(&v.features, p, r)?.reward;
    }
    e.val_reward = Some(total / data.val.len() as f64);
    e.val_n_p = Some(picks.iter().map(Vec::len).sum::<usize>() as f64 / picks.len() as f64);
    Ok(())
}

/// Best-model rule for policy stages: highest validation CIDEr among epochs
/// whose mean greedy pick count respects the current limits.
pub(crate) fn is_better(e: &EpochStats, reward: &RewardConfig, stats: &TrainStats, have_best: bool, best_in_range: bool) -> (bool, bool) {
    let n_p = e.val_n_p.unwrap_or(0.0);
    let in_range = n_p >= reward.n_min as f64 && n_p <= reward.n_max as f64;
    let better = match (in_range, best_in_range) {
        _ if !have_best => true,
        (true, false) => true,
        (false, true) => false,
        _ => e.val_cider > stats.best_val_cider,
    };
    (better, in_range)
}

/// Trains the pick policy against the frozen captioner. The pick ceiling
/// follows `nmax_schedule`; the reward's `lambda_v` is used as given.
pub fn train_reinforcement(
    data: &TrainingData,
    mut picknet: PickNetParams,
    seq2seq: &Seq2SeqParams,
    cfg: &TrainConfig,
) -> Result<(PickNetParams, TrainStats)> {
    cfg.validate()?;
    let epochs = cfg.epochs_reinforcement;
    let mut rng = Rng::with_stream(cfg.seed, Stage::Reinforcement.stream());
    let mut adam = AdamState::new(&picknet, cfg.adam(Stage::Reinforcement));
    let batch = data.batch_size(cfg.batch_size);
    let n_frames = data.train[0].n_frames();
    let mut stats = TrainStats::default();
    let mut best: Option<PickNetParams> = None;
    let mut best_in_range = false;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..epochs {
        let started = Instant::now();
        let mut reward = cfg.reward.clone();
        reward.n_max = nmax_schedule(epoch, epochs, n_frames, reward.tau)?.max(reward.tau);
        let env = RewardEnv {
            seq2seq,
            vocab: &data.vocab,
            idf: &data.reward_idf,
            cfg: &reward,
        };
        rng.shuffle(&mut order);
        let (mut total_reward, mut total_picks) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let up = reinforce_step(&data.train[i], &data.train_refs[i], &mut picknet, env, cfg.baseline, scale, &mut rng)?;
                total_reward += up.sampled_reward.reward;
                total_picks += up.sampled.n_picked();
            }
            adam.step(&mut picknet)?;
        }
        let n = data.train.len() as f64;
        let mut e = EpochStats::new(Stage::Reinforcement, epoch);
        e.loss_r = Some(-total_reward / n);
        e.mean_n_p = Some(total_picks as f64 / n);
        e.n_max = Some(reward.n_max);
        validate_policy(data, &picknet, seq2seq, &reward, &mut e)?;
        let (better, in_range) = is_better(&e, &reward, &stats, best.is_some(), best_in_range);
        if better {
            stats.best_val_cider = e.val_cider;
            stats.best_epoch = epoch;
            best_in_range = in_range;
            best = Some(picknet.clone());
        }
        stats.push(e, started, data.verbose);
    }
    Ok((best.unwrap_or(picknet), stats))
}
