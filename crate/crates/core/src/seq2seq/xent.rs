use crate::error::{Error, Result};
use crate::numerics::{dropout_mask, softmax_stable, Rng};
use crate::text::{TokenId, BOS};

use super::decoder::{best_word, logits, word_softmax_backward};
use super::encoder::{encode_backward, encode_train};
use super::gru::{gru_step_backward, gru_step_embedded, DecoderState, GruStepTrace};
use super::Seq2SeqParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XentOptions {
    /// Probability of feeding back the model's own argmax word instead of
    /// the ground truth (scheduled sampling).
    pub feedback_prob: f64,
    /// Apply dropout masks at the configured retain probability.
    pub dropout: bool,
    /// Multiplier applied to every accumulated gradient (e.g. `1/batch`).
    pub grad_scale: f64,
}

impl Default for XentOptions {
    fn default() -> Self {
        Self {
            feedback_prob: 0.0,
            dropout: false,
            grad_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct XentOutcome {
    /// Summed negative log-likelihood over all captions.
    pub loss: f64,
    pub tokens: usize,
    /// `dL/dx` for each input frame feature (scaled by `grad_scale`).
    pub feature_grads: Vec<Vec<f64>>,
    /// Words actually fed to the decoder at each step, per caption.
    pub fed_words: Vec<Vec<TokenId>>,
}

struct DecodeStep {
    trace: GruStepTrace,
    word: TokenId,
    emb_mask: Vec<f64>,
    out: Vec<f64>,
    out_mask: Vec<f64>,
    probs: Vec<f64>,
}

/// Cross-entropy `-sum_t log p(y_t | ..., v)` of each target caption given
/// the encoding of `features`, with gradients accumulated into `params`
/// through the decoder and the encoder.
///
/// Each target must already end with EOS if the model should learn to stop.
/// Multiple captions share one encoder pass; their code gradients are summed.
pub fn xent_loss_and_grads(
    params: &mut Seq2SeqParams,
    features: &[&[f64]],
    captions: &[&[TokenId]],
    opts: XentOptions,
    rng: &mut Rng,
) -> Result<XentOutcome> {
    if captions.iter().any(|c| c.is_empty()) {
        return Err(Error::Usage("empty target caption".into()));
    }
    if !(0.0..=1.0).contains(&opts.feedback_prob) {
        return Err(Error::Usage(format!("feedback probability {} not in [0, 1]", opts.feedback_prob)));
    }
    let vocab = params.gru.vocab_size();
    if let Some(bad) = captions.iter().flat_map(|c| c.iter()).find(|&&w| w as usize >= vocab) {
        return Err(Error::Usage(format!("target word id {bad} out of range for vocabulary of {vocab}")));
    }
    let retain = params.config.retain_prob;
    let (v, enc_trace) = encode_train(features, params, if opts.dropout { Some(&mut *rng) } else { None })?;

    let mut loss = 0.0;
    let mut tokens = 0;
    let mut fed_words = Vec::with_capacity(captions.len());
    let mut caption_steps: Vec<Vec<DecodeStep>> = Vec::with_capacity(captions.len());
    for caption in captions {
        let mut state = DecoderState::zeros(params.config.hidden_dim);
        let mut prev = BOS;
        let mut steps: Vec<DecodeStep> = Vec::with_capacity(caption.len());
        for (t, &target) in caption.iter().enumerate() {
            if t > 0 {
                let own = opts.feedback_prob > 0.0 && rng.bernoulli(opts.feedback_prob);
                prev = if own {
                    best_word(&steps[t - 1].probs)
                } else {
                    caption[t - 1]
                };
            }
            let mut e = params.gru.embed.value.row(prev as usize).to_vec();
            let emb_mask = if opts.dropout {
                dropout_mask(e.len(), retain, rng)
            } else {
                vec![1.0; e.len()]
            };
            e.iter_mut().zip(&emb_mask).for_each(|(a, m)| *a *= m);
            let (next, trace) = gru_step_embedded(e, &v, &state, &params.gru)?;
            let out_mask = if opts.dropout {
                dropout_mask(next.p.len(), retain, rng)
            } else {
                vec![1.0; next.p.len()]
            };
            let out: Vec<f64> = next.p.iter().zip(&out_mask).map(|(a, m)| a * m).collect();
            let probs = softmax_stable(&logits(&out, &params.gru))?;
            loss -= probs[target as usize].max(f64::MIN_POSITIVE).ln();
            tokens += 1;
            state = next;
            steps.push(DecodeStep {
                trace,
                word: prev,
                emb_mask,
                out,
                out_mask,
                probs,
            });
        }
        fed_words.push(steps.iter().map(|s| s.word).collect());
        caption_steps.push(steps);
    }

    let scale = opts.grad_scale;
    let mut dv = vec![0.0; v.len()];
    for (caption, steps) in captions.iter().zip(&caption_steps) {
        let mut dp_next = vec![0.0; params.config.hidden_dim];
        for (t, step) in steps.iter().enumerate().rev() {
            let dout = word_softmax_backward(&step.out, &step.probs, caption[t], scale, &mut params.gru);
            let dp: Vec<f64> = (0..dout.len()).map(|k| dp_next[k] + dout[k] * step.out_mask[k]).collect();
            let (de, dv_t, dp_prev) = gru_step_backward(&step.trace, &dp, &mut params.gru);
            let row = params.gru.embed.grad.row_mut(step.word as usize);
            for ((g, d), m) in row.iter_mut().zip(&de).zip(&step.emb_mask) {
                *g += d * m;
            }
            dv.iter_mut().zip(&dv_t).for_each(|(a, b)| *a += b);
            dp_next = dp_prev;
        }
    }
    let feature_grads = encode_backward(&enc_trace, &dv, params);

    Ok(XentOutcome {
        loss,
        tokens,
        feature_grads,
        fed_words,
    })
}
