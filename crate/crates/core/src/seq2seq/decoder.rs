use crate::error::Result;
use crate::numerics::softmax_stable;
use crate::text::{TokenId, BOS, EOS, PAD};

use super::gru::{gru_step, DecoderState};
use super::GruParams;

pub(crate) fn logits(p: &[f64], params: &GruParams) -> Vec<f64> {
    let mut out = vec![0.0; params.vocab_size()];
    params.proj.value.matvec_acc(p, &mut out);
    out
}

/// `softmax(W_p p)` over the whole vocabulary.
pub fn word_distribution(state: &DecoderState, params: &GruParams) -> Result<Vec<f64>> {
    softmax_stable(&logits(&state.p, params))
}

/// Backward through `-scale * ln softmax(W_p out)[target]` given the
/// forward `probs`. Accumulates into `W_p.grad` and returns the gradient
/// with respect to `out`.
pub fn word_softmax_backward(out: &[f64], probs: &[f64], target: TokenId, scale: f64, params: &mut GruParams) -> Vec<f64> {
    let mut dlogits: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    dlogits[target as usize] -= scale;
    params.proj.grad.outer_acc(&dlogits, out, 1.0);
    let mut dout = vec![0.0; out.len()];
    params.proj.value.matvec_t_acc(&dlogits, &mut dout);
    dout
}

/// Most probable word, never PAD or BOS; ties go to the lower id.
pub fn best_word(probs: &[f64]) -> TokenId {
    let mut best = EOS as usize;
    for (i, &p) in probs.iter().enumerate() {
        if i == PAD as usize || i == BOS as usize {
            continue;
        }
        if p > probs[best] || (p == probs[best] && i < best) {
            best = i;
        }
    }
    best as TokenId
}

/// Starts from BOS, feeds back the argmax word, and stops on EOS or after
/// `max_len` words. The returned caption excludes EOS.
pub fn greedy_decode(v: &[f64], params: &GruParams, max_len: usize) -> Result<Vec<TokenId>> {
    let mut state = DecoderState::zeros(params.hidden_dim());
    let mut prev = BOS;
    let mut out = Vec::new();
    while out.len() < max_len {
        let (next, _) = gru_step(prev, v, &state, params)?;
        state = next;
        let w = best_word(&word_distribution(&state, params)?);
        if w == EOS {
            break;
        }
        out.push(w);
        prev = w;
    }
    Ok(out)
}
