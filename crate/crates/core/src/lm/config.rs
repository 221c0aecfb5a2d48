use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Dropout probabilities at the five AWD-LSTM sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropouts {
    /// Locked dropout on the top layer's output, before the decoder.
    pub output: f64,
    /// Locked dropout between stacked layers.
    pub hidden: f64,
    /// Locked dropout on the embedded input.
    pub input: f64,
    /// Whole-row dropout on the embedding matrix.
    pub embedding: f64,
    /// DropConnect on the hidden-to-hidden matrices.
    pub weight: f64,
}

impl Dropouts {
    /// Base profile that a single dropout multiplier scales.
    pub const BASE: Dropouts = Dropouts {
        output: 0.4,
        hidden: 0.3,
        input: 0.6,
        embedding: 0.1,
        weight: 0.5,
    };

    pub const NONE: Dropouts = Dropouts {
        output: 0.0,
        hidden: 0.0,
        input: 0.0,
        embedding: 0.0,
        weight: 0.0,
    };

    /// `BASE` with every probability multiplied by `mult`.
    pub fn scaled(mult: f64) -> Dropouts {
        let b = Self::BASE;
        Dropouts {
            output: b.output * mult,
            hidden: b.hidden * mult,
            input: b.input * mult,
            embedding: b.embedding * mult,
            weight: b.weight * mult,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("output", self.output),
            ("hidden", self.hidden),
            ("input", self.input),
            ("embedding", self.embedding),
            ("weight", self.weight),
        ] {
            if !(0.0..1.0).contains(&p) {
                bail!(Config, "{} dropout {} outside [0, 1)", name, p);
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::NONE
    }
}

/// Named hyperparameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// CPU-sized network used by default and in tests.
    Desk,
    /// 400-d embeddings, three 1150-unit layers, batch 70.
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(alloc::format!(
                "unknown preset `{}` (desk|paper)",
                other
            ))),
        }
    }
}

/// Multiplier applied to [`Dropouts::BASE`] for both learners.
pub const DROPOUT_MULT: f64 = 0.7;

/// Pretraining dropout multiplier of the desk preset.
pub const DESK_PRETRAIN_DROPOUT_MULT: f64 = 0.1;

impl Preset {
    /// Multiplier behind the preset's pretraining [`Dropouts`].
    pub fn dropout_mult(self) -> f64 {
        match self {
            Preset::Desk => DESK_PRETRAIN_DROPOUT_MULT,
            Preset::Paper => DROPOUT_MULT,
        }
    }
}

/// Language-model hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    /// Output width of the top layer. Defaults to `emb_dim` when weights are
    /// tied and `hidden_dim` otherwise.
    pub last_hidden_dim: Option<usize>,
    pub bptt_len: usize,
    pub batch_size: usize,
    pub dropouts: Dropouts,
    pub tie_weights: bool,
    pub epochs: usize,
    pub base_lr: f64,
}

impl LmConfig {
    pub fn preset(preset: Preset, vocab_size: usize) -> LmConfig {
        match preset {
            Preset::Desk => LmConfig {
                vocab_size,
                emb_dim: 64,
                hidden_dim: 128,
                n_layers: 3,
                last_hidden_dim: None,
                bptt_len: 35,
                batch_size: 32,
                dropouts: Dropouts::scaled(DESK_PRETRAIN_DROPOUT_MULT),
                tie_weights: true,
                epochs: 10,
                base_lr: 1e-2,
            },
            Preset::Paper => LmConfig {
                vocab_size,
                emb_dim: 400,
                hidden_dim: 1150,
                n_layers: 3,
                last_hidden_dim: None,
                bptt_len: 70,
                batch_size: 70,
                dropouts: Dropouts::scaled(Preset::Paper.dropout_mult()),
                tie_weights: true,
                epochs: 2,
                base_lr: 1e-3,
            },
        }
    }

    pub fn desk(vocab_size: usize) -> LmConfig {
        Self::preset(Preset::Desk, vocab_size)
    }

    pub fn paper(vocab_size: usize) -> LmConfig {
        Self::preset(Preset::Paper, vocab_size)
    }

    /// Width of the top layer's output.
    pub fn output_dim(&self) -> usize {
        match self.last_hidden_dim {
            Some(d) => d,
            None if self.tie_weights => self.emb_dim,
            None => self.hidden_dim,
        }
    }

    /// `(input width, hidden width)` of every layer, bottom first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.n_layers)
            .map(|l| {
                let input = if l == 0 {
                    self.emb_dim
                } else {
                    self.hidden_dim
                };
                let hidden = if l + 1 == self.n_layers {
                    self.output_dim()
                } else {
                    self.hidden_dim
                };
                (input, hidden)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 {
            bail!(Config, "n_layers must be at least 1");
        }
        if self.vocab_size <= crate::corpus::SPECIALS.len() {
            bail!(
                Config,
                "vocab_size {} leaves no room beyond the special tokens",
                self.vocab_size
            );
        }
        if self.emb_dim == 0 || self.hidden_dim == 0 || self.output_dim() == 0 {
            bail!(Config, "layer widths must be positive");
        }
        if self.bptt_len == 0 || self.batch_size == 0 {
            bail!(Config, "bptt_len and batch_size must be positive");
        }
        if !(self.base_lr > 0.0) {
            bail!(Config, "base_lr must be positive");
        }
        if self.tie_weights && self.output_dim() != self.emb_dim {
            bail!(
                Config,
                "tied weights need the top layer width ({}) to equal emb_dim ({})",
                self.output_dim(),
                self.emb_dim
            );
        }
        self.dropouts.validate()
    }

    /// Closed-form parameter count: embedding, stacked LSTMs with one bias
    /// vector per layer, decoder bias, and the decoder matrix when untied.
    pub fn param_count(&self) -> usize {
        let emb = self.vocab_size * self.emb_dim;
        let rnn: usize = self
            .layer_dims()
            .iter()
            .map(|&(i, h)| i * 4 * h + h * 4 * h + 4 * h)
            .sum();
        let decoder = self.vocab_size
            + if self.tie_weights {
                0
            } else {
                self.vocab_size * self.output_dim()
            };
        emb + rnn + decoder
    }
}
