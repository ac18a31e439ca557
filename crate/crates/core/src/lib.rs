//! Frame picking for fast video captioning: a glance-driven pick policy in
//! front of an LSTM/GRU captioner, trained with cross-entropy and then
//! policy gradients.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod glance;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod picknet;
pub mod rewards;
pub mod seq2seq;
pub mod stream;
pub mod text;
pub mod training;

pub use error::{Error, Result};
