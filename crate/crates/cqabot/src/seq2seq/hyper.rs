use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything that shapes the model and the training loop.
///
/// [`Hyperparams::full_scale`] holds the full-scale settings (vocabulary of
/// 40,000 subword units, 512-dimensional embeddings, a 2-layer GRU with 512
/// units, minibatch 80, learning rate 0.5, evaluation every 2,000
/// iterations). Runs of that size need the full 2M-pair corpus and are out
/// of reach on a desk machine, so [`Hyperparams::desk`] scales every width
/// down while keeping the architecture identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// `(source_len, target_len)` padded shapes, sorted by source length.
    pub buckets: Vec<(usize, usize)>,
    pub eval_every: u64,
    pub clip_norm: f64,
    pub seed: u64,
}

const DEFAULT_BUCKETS: [(usize, usize); 4] = [(5, 10), (10, 15), (20, 25), (40, 45)];

impl Hyperparams {
    /// Full-scale settings.
    pub fn full_scale() -> Hyperparams {
        Hyperparams {
            vocab_size: 40_000,
            embed_dim: 512,
            hidden_dim: 512,
            num_layers: 2,
            minibatch: 80,
            learning_rate: 0.5,
            buckets: DEFAULT_BUCKETS.to_vec(),
            eval_every: 2_000,
            clip_norm: 5.0,
            seed: 1,
        }
    }

    /// Settings small enough to train and test on one CPU core.
    pub fn desk() -> Hyperparams {
        Hyperparams {
            vocab_size: 200,
            embed_dim: 16,
            hidden_dim: 16,
            num_layers: 2,
            minibatch: 8,
            learning_rate: 0.5,
            buckets: DEFAULT_BUCKETS.to_vec(),
            eval_every: 500,
            clip_norm: 5.0,
            seed: 1,
        }
    }

    /// Largest target length across buckets; the decode length cap.
    pub fn max_target_len(&self) -> usize {
        self.buckets.iter().map(|b| b.1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 {
            return Err(Error::invalid(
                "vocab_size must be at least 5 (4 reserved ids + 1 symbol)",
            ));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("embed_dim and hidden_dim must be positive"));
        }
        if self.num_layers == 0 {
            return Err(Error::invalid("num_layers must be at least 1"));
        }
        if self.minibatch == 0 {
            return Err(Error::invalid("minibatch must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::invalid("clip_norm must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be at least 1"));
        }
        if self.buckets.is_empty() {
            return Err(Error::invalid("at least one bucket is required"));
        }
        for window in self.buckets.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(Error::invalid(
                    "buckets must be sorted by strictly increasing source length",
                ));
            }
        }
        for &(src_len, tgt_len) in &self.buckets {
            if src_len == 0 || tgt_len < 2 {
                return Err(Error::invalid(
                    "each bucket needs source length >= 1 and target length >= 2",
                ));
            }
        }
        Ok(())
    }
}
