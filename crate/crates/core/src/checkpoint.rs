//! "PKNC" checkpoints: named f64 tensors followed by a JSON config blob.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Param, ParamSet, Tensor};
use crate::picknet::PickNetParams;
use crate::rewards::RewardConfig;
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqParams};
use crate::text::Vocabulary;
use crate::training::Stage;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PKNC";
pub const CHECKPOINT_VERSION: u32 = 1;
const INIT_SCHEME: &str = "glorot-uniform weights, zero biases";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickNetDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// The JSON blob stored after the tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    pub stage: Stage,
    pub seq2seq: Seq2SeqConfig,
    #[serde(default)]
    pub picknet: Option<PickNetDims>,
    pub vocab_tokens: Vec<String>,
    pub vocab_min_freq: usize,
    pub vocab_hash: String,
    /// Reward settings in force when the checkpoint was written.
    #[serde(default)]
    pub reward: Option<RewardConfig>,
    pub init: String,
    pub seed: u64,
}

/// Everything needed to caption (and pick) without the training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    pub seq2seq: Seq2SeqParams,
    pub picknet: Option<PickNetParams>,
    pub vocab: Vocabulary,
    pub reward: Option<RewardConfig>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn config(&self) -> CheckpointConfig {
        CheckpointConfig {
            stage: self.stage,
            seq2seq: self.seq2seq.config.clone(),
            picknet: self.picknet.as_ref().map(|p| PickNetDims {
                input_dim: p.input_dim(),
                hidden_dim: p.hidden_dim(),
            }),
            vocab_tokens: self.vocab.tokens().to_vec(),
            vocab_min_freq: self.vocab.min_freq(),
            vocab_hash: self.vocab.fingerprint(),
            reward: self.reward.clone(),
            init: INIT_SCHEME.into(),
            seed: self.seed,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.vocab.len() != self.seq2seq.config.vocab_size {
            return Err(Error::shape("checkpoint vocabulary", self.seq2seq.config.vocab_size, self.vocab.len()));
        }
        let mut params: Vec<&Param> = self.seq2seq.params();
        if let Some(p) = &self.picknet {
            params.extend(p.params());
        }
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        for p in params {
            let name = p.name.as_bytes();
            let name_len = u16::try_from(name.len()).map_err(|_| Error::Usage(format!("tensor name {:?} too long", p.name)))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            let (r, c) = p.value.shape();
            if c == 1 {
                out.extend_from_slice(&1u32.to_le_bytes());
                out.extend_from_slice(&(r as u32).to_le_bytes());
            } else {
                out.extend_from_slice(&2u32.to_le_bytes());
                out.extend_from_slice(&(r as u32).to_le_bytes());
                out.extend_from_slice(&(c as u32).to_le_bytes());
            }
            for v in p.value.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(serde_json::to_string(&self.config())?.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected PKNC"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(path, 4, format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.pos as u64;
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(path, at, "tensor name is not UTF-8"))?
                .to_owned();
            let rank_at = r.pos as u64;
            let (rows, cols) = match r.u32()? {
                1 => (r.u32()? as usize, 1),
                2 => (r.u32()? as usize, r.u32()? as usize),
                k => return Err(Error::format(path, rank_at, format!("tensor {name}: unsupported rank {k}"))),
            };
            let n = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::format(path, rank_at, "tensor size overflows"))?;
            let data = r
                .take(n)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push(Param::new(name, Tensor::from_vec(rows, cols, data)?));
        }
        let json_at = r.pos as u64;
        let cfg: CheckpointConfig = serde_json::from_slice(&bytes[r.pos..])
            .map_err(|e| Error::format(path, json_at, format!("config blob: {e}")))?;
        Self::assemble(cfg, tensors, path, json_at)
    }

    fn assemble(cfg: CheckpointConfig, tensors: Vec<Param>, path: &Path, json_at: u64) -> Result<Self> {
        let vocab = Vocabulary::from_tokens(cfg.vocab_tokens, cfg.vocab_min_freq)?;
        if vocab.fingerprint() != cfg.vocab_hash {
            return Err(Error::format(path, json_at, "vocabulary hash does not match its tokens"));
        }
        let mut seq2seq = Seq2SeqParams::zeroed(cfg.seq2seq)?;
        let mut picknet = cfg.picknet.map(|d| {
            let mut p = PickNetParams::with_input(d.input_dim, d.hidden_dim, &mut crate::numerics::Rng::new(0));
            p.params_mut().into_iter().for_each(|q| q.value.fill(0.0));
            p
        });
        let mut slots: Vec<&mut Param> = seq2seq.params_mut();
        if let Some(p) = picknet.as_mut() {
            slots.extend(p.params_mut());
        }
        if slots.len() != tensors.len() {
            return Err(Error::format(
                path,
                json_at,
                format!("config expects {} tensors, file holds {}", slots.len(), tensors.len()),
            ));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if slot.name != t.name || slot.value.shape() != t.value.shape() {
                return Err(Error::format(
                    path,
                    json_at,
                    format!("tensor {} {} does not match expected {} {}", t.name, t.value, slot.name, slot.value),
                ));
            }
            slot.value = t.value;
        }
        if vocab.len() != seq2seq.config.vocab_size {
            return Err(Error::format(path, json_at, "vocabulary size does not match the decoder"));
        }
        Ok(Self {
            stage: cfg.stage,
            seq2seq,
            picknet,
            vocab,
            reward: cfg.reward,
            seed: cfg.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn require_picknet(&self) -> Result<&PickNetParams> {
        self.picknet
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} checkpoint has no PickNet weights", self.stage.name())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.path, self.pos as u64, format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
