//! Online captioning: frames arrive one at a time, the greedy pick policy
//! decides on the spot, and every pick advances the encoder by one step and
//! re-decodes the caption. No pick cap is applied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glance::{glance_diff, Glance, PickTemplate};
use crate::picknet::{pick_policy, PickNetParams, DROP, PICK};
use crate::seq2seq::{greedy_decode, Seq2SeqParams, StreamingEncoder};
use crate::text::Vocabulary;

/// One line of stream output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    /// Seconds since the first frame.
    pub t: f64,
    pub picked: bool,
    /// Caption after this pick; `None` when the frame was dropped.
    pub caption: Option<String>,
    pub n_p: usize,
}

pub struct StreamCaptioner<'a> {
    picknet: &'a PickNetParams,
    vocab: &'a Vocabulary,
    encoder: StreamingEncoder<'a>,
    template: Option<PickTemplate>,
    fps: f64,
    frame: usize,
    n_p: usize,
    caption: Option<String>,
}

impl<'a> StreamCaptioner<'a> {
    pub fn new(picknet: &'a PickNetParams, seq2seq: &'a Seq2SeqParams, vocab: &'a Vocabulary, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Usage(format!("fps must be positive, got {fps}")));
        }
        if vocab.len() != seq2seq.config.vocab_size {
            return Err(Error::shape("stream vocabulary", seq2seq.config.vocab_size, vocab.len()));
        }
        Ok(Self {
            picknet,
            vocab,
            encoder: StreamingEncoder::new(seq2seq),
            template: None,
            fps,
            frame: 0,
            n_p: 0,
            caption: None,
        })
    }

    /// Feeds the next frame. `feature` is only read when the frame is picked.
    pub fn push<F>(&mut self, glance: &Glance, feature: F) -> Result<StreamEvent>
    where
        F: FnOnce() -> Result<Vec<f64>>,
    {
        let pick = match &self.template {
            None => true,
            Some(template) => {
                let out = pick_policy(&glance_diff(glance, template), self.picknet)?;
                out.probs[PICK] >= out.probs[DROP]
            }
        };
        let t = self.frame as f64 / self.fps;
        self.frame += 1;
        if !pick {
            return Ok(StreamEvent {
                t,
                picked: false,
                caption: None,
                n_p: self.n_p,
            });
        }
        self.template = Some(glance.clone());
        let v = self.encoder.push(&feature()?)?.to_vec();
        let params = self.encoder_params();
        let ids = greedy_decode(&v, &params.gru, params.config.max_len)?;
        let caption = self.vocab.decode(&ids)?;
        self.n_p += 1;
        self.caption = Some(caption.clone());
        Ok(StreamEvent {
            t,
            picked: true,
            caption: Some(caption),
            n_p: self.n_p,
        })
    }

    fn encoder_params(&self) -> &'a Seq2SeqParams {
        self.encoder.params()
    }

    /// The latest caption, if anything has been picked.
    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }

    pub fn encoder(&self) -> &StreamingEncoder<'a> {
        &self.encoder
    }

    pub fn n_picked(&self) -> usize {
        self.n_p
    }
}

/// Replays a stored video through a `StreamCaptioner`.
pub fn stream_caption(
    glances: &[Glance],
    features: &[Vec<f64>],
    picknet: &PickNetParams,
    seq2seq: &Seq2SeqParams,
    vocab: &Vocabulary,
    fps: f64,
) -> Result<Vec<StreamEvent>> {
    if glances.len() != features.len() {
        return Err(Error::shape("stream features", glances.len(), features.len()));
    }
    let mut s = StreamCaptioner::new(picknet, seq2seq, vocab, fps)?;
    glances
        .iter()
        .zip(features)
        .map(|(g, f)| s.push(g, || Ok(f.clone())))
        .collect()
}
