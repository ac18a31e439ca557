//! Tokenization, vocabulary construction and index encoding.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Lowercases, splits off a trailing `'s` as its own token, strips
/// punctuation at word edges and drops tokens that were only punctuation.
/// Hyphens and digits inside a word are kept verbatim.
pub fn tokenize(raw: &str) -> Vec<String> {
    let lower = raw.to_lowercase();
    let mut out = Vec::new();
    for chunk in lower.split_whitespace() {
        push_word(chunk, &mut out);
    }
    out
}

fn push_word(chunk: &str, out: &mut Vec<String>) {
    if chunk == "'s" {
        out.push(chunk.to_string());
        return;
    }
    let word = chunk
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .trim_end_matches('\'');
    if let Some(stem) = word.strip_suffix("'s") {
        push_word(stem, out);
        out.push("'s".to_string());
        return;
    }
    let word = word.trim_matches(|c: char| !c.is_alphanumeric());
    if !word.is_empty() {
        out.push(word.to_string());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    min_freq: usize,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_freq` times, ordered by descending
    /// count then lexicographically, after the four reserved ids.
    pub fn build<S: AsRef<str>>(corpus: &[Vec<S>], min_freq: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in corpus {
            for tok in sentence {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !RESERVED.contains(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens, min_freq).expect("reserved prefix is always present")
    }

    pub fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..4] != RESERVED {
            return Err(Error::Config("vocabulary must start with <pad> <bos> <eos> <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            min_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or_else(|| Error::Usage(format!("token id {id} out of range for vocabulary of {}", self.len())))
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.lookup(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let words = ids.iter().map(|&id| self.token(id)).collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }

    /// FNV-1a over the ordered token list; stored in checkpoints to detect
    /// a vocabulary that does not match the trained embedding rows.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(std::iter::once(0u8)) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            tokens: self.tokens.clone(),
            min_freq: self.min_freq,
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: VocabFile = serde_json::from_str(s)?;
        Self::from_tokens(f.tokens, f.min_freq)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Drops BOS/EOS/PAD so only content words reach the metrics.
pub fn strip_special(ids: &[TokenId]) -> Vec<TokenId> {
    ids.iter().copied().filter(|&id| !matches!(id, PAD | BOS | EOS)).collect()
}
