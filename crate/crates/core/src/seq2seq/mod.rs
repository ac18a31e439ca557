//! LSTM video encoder, GRU caption decoder, greedy decoding and
//! cross-entropy training with scheduled sampling.

mod decoder;
mod encoder;
mod gru;
mod lstm;
mod xent;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Param, ParamSet, Rng, Tensor};

pub use decoder::{best_word, greedy_decode, word_distribution, word_softmax_backward};
pub use encoder::{encode_sequence, EncoderTrace, StreamingEncoder};
pub use gru::{gru_step, gru_step_backward, DecoderState, GruStepTrace};
pub use lstm::{lstm_step, lstm_step_backward, EncoderState, LstmStepTrace};
pub use xent::{xent_loss_and_grads, XentOptions, XentOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seq2SeqConfig {
    pub feature_dim: usize,
    /// Size of both the frame-feature and word embeddings.
    pub embed_dim: usize,
    /// Encoder and decoder hidden size.
    pub hidden_dim: usize,
    pub vocab_size: usize,
    /// `false` keeps the output gate as `tanh`; `true` uses the usual sigmoid.
    #[serde(default)]
    pub standard_output_gate: bool,
    /// Dropout retain probability during training.
    #[serde(default = "default_retain")]
    pub retain_prob: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_retain() -> f64 {
    0.5
}

fn default_max_len() -> usize {
    20
}

impl Seq2SeqConfig {
    /// Full-size model: 512-d embeddings, 1024-d hidden states.
    pub fn full(feature_dim: usize, vocab_size: usize) -> Self {
        Self {
            feature_dim,
            embed_dim: 512,
            hidden_dim: 1024,
            vocab_size,
            standard_output_gate: false,
            retain_prob: default_retain(),
            max_len: default_max_len(),
        }
    }

    pub fn desk(feature_dim: usize, vocab_size: usize) -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 64,
            ..Self::full(feature_dim, vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("seq2seq dimensions must be positive".into()));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config(format!("vocabulary of {} has no room for reserved ids", self.vocab_size)));
        }
        if !(self.retain_prob > 0.0 && self.retain_prob <= 1.0) {
            return Err(Error::Config(format!("retain probability {} not in (0, 1]", self.retain_prob)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_ix: Param,
    pub w_ih: Param,
    pub b_i: Param,
    pub w_fx: Param,
    pub w_fh: Param,
    pub b_f: Param,
    pub w_gx: Param,
    pub w_gh: Param,
    pub b_g: Param,
    pub w_ox: Param,
    pub w_oh: Param,
    pub b_o: Param,
}

impl LstmParams {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut w = |name: &str, cols: usize| Param::new(format!("encoder.{name}"), Tensor::glorot(hidden, cols, rng));
        let b = |name: &str| Param::new(format!("encoder.{name}"), Tensor::zeros(hidden, 1));
        Self {
            w_ix: w("w_ix", input),
            w_ih: w("w_ih", hidden),
            b_i: b("b_i"),
            w_fx: w("w_fx", input),
            w_fh: w("w_fh", hidden),
            b_f: b("b_f"),
            w_gx: w("w_gx", input),
            w_gh: w("w_gh", hidden),
            b_g: b("b_g"),
            w_ox: w("w_ox", input),
            w_oh: w("w_oh", hidden),
            b_o: b("b_o"),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ix.value.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_ix.value.rows()
    }
}

impl ParamSet for LstmParams {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_ix, &self.w_ih, &self.b_i, &self.w_fx, &self.w_fh, &self.b_f, &self.w_gx, &self.w_gh,
            &self.b_g, &self.w_ox, &self.w_oh, &self.b_o,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_ix, &mut self.w_ih, &mut self.b_i, &mut self.w_fx, &mut self.w_fh, &mut self.b_f,
            &mut self.w_gx, &mut self.w_gh, &mut self.b_g, &mut self.w_ox, &mut self.w_oh, &mut self.b_o,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_zw: Param,
    pub w_zv: Param,
    pub w_zp: Param,
    pub b_z: Param,
    pub w_rw: Param,
    pub w_rv: Param,
    pub w_rp: Param,
    pub b_r: Param,
    pub w_pw: Param,
    pub w_pv: Param,
    pub w_pp: Param,
    pub b_p: Param,
    /// Word embedding, one row per vocabulary id.
    pub embed: Param,
    /// Projection from decoder state to vocabulary logits.
    pub proj: Param,
}

impl GruParams {
    pub fn new(vocab: usize, embed: usize, video: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut w = |name: &str, rows: usize, cols: usize| {
            Param::new(format!("decoder.{name}"), Tensor::glorot(rows, cols, rng))
        };
        let w_zw = w("w_zw", hidden, embed);
        let w_zv = w("w_zv", hidden, video);
        let w_zp = w("w_zp", hidden, hidden);
        let w_rw = w("w_rw", hidden, embed);
        let w_rv = w("w_rv", hidden, video);
        let w_rp = w("w_rp", hidden, hidden);
        let w_pw = w("w_pw", hidden, embed);
        let w_pv = w("w_pv", hidden, video);
        let w_pp = w("w_pp", hidden, hidden);
        let embed_w = w("embed", vocab, embed);
        let proj = w("proj", vocab, hidden);
        let b = |name: &str| Param::new(format!("decoder.{name}"), Tensor::zeros(hidden, 1));
        Self {
            w_zw,
            w_zv,
            w_zp,
            b_z: b("b_z"),
            w_rw,
            w_rv,
            w_rp,
            b_r: b("b_r"),
            w_pw,
            w_pv,
            w_pp,
            b_p: b("b_p"),
            embed: embed_w,
            proj,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.value.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_zp.value.rows()
    }
}

impl ParamSet for GruParams {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_zw, &self.w_zv, &self.w_zp, &self.b_z, &self.w_rw, &self.w_rv, &self.w_rp, &self.b_r,
            &self.w_pw, &self.w_pv, &self.w_pp, &self.b_p, &self.embed, &self.proj,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_zw, &mut self.w_zv, &mut self.w_zp, &mut self.b_z, &mut self.w_rw, &mut self.w_rv,
            &mut self.w_rp, &mut self.b_r, &mut self.w_pw, &mut self.w_pv, &mut self.w_pp, &mut self.b_p,
            &mut self.embed, &mut self.proj,
        ]
    }
}

/// All encoder-decoder weights: feature embedding, LSTM and GRU.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2SeqParams {
    pub config: Seq2SeqConfig,
    pub feat_w: Param,
    pub feat_b: Param,
    pub lstm: LstmParams,
    pub gru: GruParams,
}

impl Seq2SeqParams {
    pub fn new(config: Seq2SeqConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let feat_w = Param::new("encoder.feat_w", Tensor::glorot(config.embed_dim, config.feature_dim, rng));
        let feat_b = Param::new("encoder.feat_b", Tensor::zeros(config.embed_dim, 1));
        let lstm = LstmParams::new(config.embed_dim, config.hidden_dim, rng);
        let gru = GruParams::new(config.vocab_size, config.embed_dim, config.hidden_dim, config.hidden_dim, rng);
        Ok(Self {
            config,
            feat_w,
            feat_b,
            lstm,
            gru,
        })
    }

    /// Sets every weight and bias to zero.
    pub fn zeroed(config: Seq2SeqConfig) -> Result<Self> {
        let mut p = Self::new(config, &mut Rng::new(0))?;
        for param in p.params_mut() {
            param.value.fill(0.0);
        }
        Ok(p)
    }

    /// Embedded frame feature `W_e x + b_e`.
    pub fn embed_feature(&self, feature: &[f64]) -> Result<Vec<f64>> {
        crate::numerics::affine(&self.feat_w.value, feature, self.feat_b.value.as_slice())
    }
}

impl ParamSet for Seq2SeqParams {
    fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.feat_w, &self.feat_b];
        v.extend(self.lstm.params());
        v.extend(self.gru.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.feat_w, &mut self.feat_b];
        v.extend(self.lstm.params_mut());
        v.extend(self.gru.params_mut());
        v
    }
}
