use crate::error::{Error, Result};
use crate::numerics::{dropout_mask, Rng};

use super::lstm::{lstm_step, lstm_step_backward, EncoderState, LstmStepTrace};
use super::Seq2SeqParams;

/// Forward record of a training-mode encoding.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    features: Vec<Vec<f64>>,
    in_masks: Vec<Vec<f64>>,
    steps: Vec<LstmStepTrace>,
    out_mask: Vec<f64>,
}

/// Embeds each frame feature, runs the LSTM from a zero state and returns
/// the final hidden state (the video code). Evaluation mode: no dropout.
pub fn encode_sequence(features: &[&[f64]], params: &Seq2SeqParams) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::Usage("cannot encode an empty feature sequence".into()));
    }
    let mut enc = StreamingEncoder::new(params);
    for f in features {
        enc.push(f)?;
    }
    Ok(enc.state.h)
}

/// Training-mode encoding. With `dropout` set, inverted dropout masks are
/// drawn for every embedded input and for the output code.
pub(crate) fn encode_train(
    features: &[&[f64]],
    params: &Seq2SeqParams,
    dropout: Option<&mut Rng>,
) -> Result<(Vec<f64>, EncoderTrace)> {
    if features.is_empty() {
        return Err(Error::Usage("cannot encode an empty feature sequence".into()));
    }
    let cfg = &params.config;
    let retain = cfg.retain_prob;
    let mut rng = dropout;
    let mut state = EncoderState::zeros(cfg.hidden_dim);
    let mut trace = EncoderTrace {
        features: Vec::with_capacity(features.len()),
        in_masks: Vec::with_capacity(features.len()),
        steps: Vec::with_capacity(features.len()),
        out_mask: Vec::new(),
    };
    for f in features {
        let mut x = params.embed_feature(f)?;
        let mask = match rng.as_deref_mut() {
            Some(r) => dropout_mask(x.len(), retain, r),
            None => vec![1.0; x.len()],
        };
        x.iter_mut().zip(&mask).for_each(|(a, m)| *a *= m);
        let (next, step) = lstm_step(&x, &state, &params.lstm, cfg.standard_output_gate)?;
        state = next;
        trace.features.push(f.to_vec());
        trace.in_masks.push(mask);
        trace.steps.push(step);
    }
    trace.out_mask = match rng {
        Some(r) => dropout_mask(cfg.hidden_dim, retain, r),
        None => vec![1.0; cfg.hidden_dim],
    };
    let v = state.h.iter().zip(&trace.out_mask).map(|(h, m)| h * m).collect();
    Ok((v, trace))
}

/// Backpropagates `dL/dv` through the encoder. Returns the gradient with
/// respect to every input frame feature.
pub(crate) fn encode_backward(trace: &EncoderTrace, dv: &[f64], params: &mut Seq2SeqParams) -> Vec<Vec<f64>> {
    let standard = params.config.standard_output_gate;
    let mut dh: Vec<f64> = dv.iter().zip(&trace.out_mask).map(|(d, m)| d * m).collect();
    let mut dc = vec![0.0; dh.len()];
    let mut feature_grads = vec![Vec::new(); trace.steps.len()];
    for t in (0..trace.steps.len()).rev() {
        let (dx, dh_prev, dc_prev) = lstm_step_backward(&trace.steps[t], &dh, &dc, &mut params.lstm, standard);
        let dxe: Vec<f64> = dx.iter().zip(&trace.in_masks[t]).map(|(d, m)| d * m).collect();
        params.feat_w.grad.outer_acc(&dxe, &trace.features[t], 1.0);
        params.feat_b.grad.add_scaled(&dxe, 1.0);
        let mut df = vec![0.0; trace.features[t].len()];
        params.feat_w.value.matvec_t_acc(&dxe, &mut df);
        feature_grads[t] = df;
        dh = dh_prev;
        dc = dc_prev;
    }
    feature_grads
}

/// Encoder that consumes one picked frame at a time; after `k` pushes its
/// hidden state equals `encode_sequence` over the same `k` features.
#[derive(Clone, Debug)]
pub struct StreamingEncoder<'a> {
    params: &'a Seq2SeqParams,
    state: EncoderState,
    frames: usize,
}

impl<'a> StreamingEncoder<'a> {
    pub fn new(params: &'a Seq2SeqParams) -> Self {
        Self {
            params,
            state: EncoderState::zeros(params.config.hidden_dim),
            frames: 0,
        }
    }

    pub fn push(&mut self, feature: &[f64]) -> Result<&[f64]> {
        let x = self.params.embed_feature(feature)?;
        let (next, _) = lstm_step(&x, &self.state, &self.params.lstm, self.params.config.standard_output_gate)?;
        self.state = next;
        self.frames += 1;
        Ok(&self.state.h)
    }

    pub fn code(&self) -> &[f64] {
        &self.state.h
    }

    pub fn params(&self) -> &'a Seq2SeqParams {
        self.params
    }

    pub fn state(&self) -> &EncoderState {
        &self.state
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
}
