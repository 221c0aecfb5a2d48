use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AwdLstm, LmConfig, TrainingLog};
use crate::corpus::Vocabulary;
use crate::error::{bail, Result};
use crate::numerics::{ParamSet, Tensor};

pub const FORMAT_VERSION: u32 = 1;

/// Pipeline stage that produced a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrained,
    LmFinetuned,
    Classifier,
}

/// Shape and regularization of a classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub hidden: usize,
    pub classes: usize,
}

/// Everything needed to rebuild a model: configuration, vocabulary,
/// parameters and the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub stage: Stage,
    pub config: LmConfig,
    pub head: Option<HeadSpec>,
    pub vocab: Vocabulary,
    pub tensors: Vec<(String, Tensor<f32>)>,
    pub log: TrainingLog,
}

impl Checkpoint {
    pub fn new(
        stage: Stage,
        config: LmConfig,
        head: Option<HeadSpec>,
        vocab: Vocabulary,
        params: &ParamSet<f32>,
        log: TrainingLog,
    ) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            stage,
            config,
            head,
            vocab,
            tensors: params
                .iter()
                .map(|(n, t)| (String::from(n), t.clone()))
                .collect(),
            log,
        }
    }

    /// Language-model checkpoint from a trained model.
    pub fn from_lm(
        model: &AwdLstm<f32>,
        stage: Stage,
        vocab: Vocabulary,
        log: TrainingLog,
    ) -> Self {
        Self::new(
            stage,
            model.config().clone(),
            None,
            vocab,
            model.params(),
            log,
        )
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn param_set(&self) -> Result<ParamSet<f32>> {
        let mut params = ParamSet::new();
        for (name, t) in &self.tensors {
            params.add(name, t.clone())?;
        }
        Ok(params)
    }

    /// Rebuilds the language model. Only pretrained and LM-fine-tuned
    /// checkpoints carry a decoder.
    pub fn language_model(&self) -> Result<AwdLstm<f32>> {
        if self.stage == Stage::Classifier {
            bail!(
                Config,
                "classifier checkpoint has no language-model decoder"
            );
        }
        if self.vocab.len() != self.config.vocab_size {
            bail!(
                Config,
                "vocabulary has {} tokens but the model expects {}",
                self.vocab.len(),
                self.config.vocab_size
            );
        }
        AwdLstm::from_params(self.config.clone(), self.param_set()?)
    }
}

/// Perplexity of a language-model checkpoint on a token-id stream.
pub fn perplexity(ckpt: &Checkpoint, stream: &[usize]) -> Result<f64> {
    ckpt.language_model()?.perplexity(stream)
}
