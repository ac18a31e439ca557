use std::time::Instant;

use crate::error::Result;
use crate::numerics::{AdamState, Rng};
use crate::seq2seq::{xent_loss_and_grads, Seq2SeqParams, XentOptions, XentOutcome};
use crate::text::TokenId;

use super::{EpochStats, Stage, TrainConfig, TrainStats, TrainingData};

/// Accumulates the cross-entropy gradient of all captions of one video given
/// the frames in `picks`.
pub fn supervision_step(
    params: &mut Seq2SeqParams,
    features: &[&[f64]],
    captions: &[Vec<TokenId>],
    feedback_prob: f64,
    grad_scale: f64,
    rng: &mut Rng,
) -> Result<XentOutcome> {
    let caps: Vec<&[TokenId]> = captions.iter().map(Vec::as_slice).collect();
    let opts = XentOptions {
        feedback_prob,
        dropout: true,
        grad_scale,
    };
    xent_loss_and_grads(params, features, &caps, opts, rng)
}

/// Trains the captioner on all frames of every training video. Returns the
/// parameters of the epoch with the best validation CIDEr.
pub fn train_supervision(
    data: &TrainingData,
    mut params: Seq2SeqParams,
    cfg: &TrainConfig,
) -> Result<(Seq2SeqParams, TrainStats)> {
    cfg.validate()?;
    let mut rng = Rng::with_stream(cfg.seed, Stage::Supervision.stream());
    let mut adam = AdamState::new(&params, cfg.adam(Stage::Supervision));
    let batch = data.batch_size(cfg.batch_size);
    let all_val: Vec<Vec<usize>> = data.val.iter().map(|v| (0..v.n_frames()).collect()).collect();
    let mut stats = TrainStats::default();
    let mut best: Option<Seq2SeqParams> = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 0..cfg.epochs_supervision {
        let started = Instant::now();
        let eps = cfg.feedback_prob(epoch);
        rng.shuffle(&mut order);
        let (mut loss, mut captions) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            let n_caps: usize = chunk.iter().map(|&i| data.train_tokens[i].len()).sum();
            let scale = 1.0 / n_caps.max(1) as f64;
            for &i in chunk {
                let out = supervision_step(
                    &mut params,
                    &data.train[i].feature_refs(),
                    &data.train_tokens[i],
                    eps,
                    scale,
                    &mut rng,
                )?;
                loss += out.loss;
            }
            captions += n_caps;
            adam.step(&mut params)?;
        }
        let mut e = EpochStats::new(Stage::Supervision, epoch);
        e.loss_x = Some(loss / captions.max(1) as f64);
        e.feedback_prob = Some(eps);
        e.val_cider = data.val_cider(&params, &all_val)?;
        if best.is_none() || e.val_cider > stats.best_val_cider {
            stats.best_val_cider = e.val_cider;
            stats.best_epoch = epoch;
            best = Some(params.clone());
        }
        stats.push(e, started, data.verbose);
    }
    Ok((best.unwrap_or(params), stats))
}
