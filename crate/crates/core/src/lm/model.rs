use alloc::vec::Vec;

use super::encoder::{check_ids, encode, param_names, tile, EncoderIds, EncoderMasks, LstmState};
use super::{Block, LmConfig};
use crate::error::{bail, Result};
use crate::numerics::{streams, Graph, ParamId, ParamSet, RngStream, Scalar, Tensor, Var};

/// AWD-LSTM language model: embedding, stacked LSTMs, linear decoder
/// (optionally tied to the embedding).
#[derive(Debug, Clone)]
pub struct AwdLstm<S> {
    config: LmConfig,
    params: ParamSet<S>,
    encoder: EncoderIds,
    decoder_bias: ParamId,
    decoder_weight: Option<ParamId>,
}

impl<S: Scalar> AwdLstm<S> {
    /// Fresh model; all initial values come from the `INIT` stream of `seed`.
    pub fn new(config: LmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(seed, streams::INIT);
        let mut params = ParamSet::new();
        let encoder = EncoderIds::init(&mut params, &config, &mut rng)?;
        let decoder_bias = params.add(
            param_names::DECODER_BIAS,
            Tensor::zeros(&[config.vocab_size]),
        )?;
        let decoder_weight = if config.tie_weights {
            None
        } else {
            let n = config.vocab_size * config.output_dim();
            let data = (0..n)
                .map(|_| S::from_f64(rng.uniform(-0.1, 0.1)))
                .collect();
            Some(params.add(
                param_names::DECODER_WEIGHT,
                Tensor::from_vec(&[config.vocab_size, config.output_dim()], data)?,
            )?)
        };
        Ok(AwdLstm {
            config,
            params,
            encoder,
            decoder_bias,
            decoder_weight,
        })
    }

    /// Wraps existing parameters, checking names and shapes.
    pub fn from_params(config: LmConfig, params: ParamSet<S>) -> Result<Self> {
        config.validate()?;
        let encoder = EncoderIds::lookup(&params, &config)?;
        let decoder_bias = params.require(param_names::DECODER_BIAS)?;
        if params.get(decoder_bias).shape() != [config.vocab_size] {
            bail!(
                Config,
                "decoder bias shape {:?}",
                params.get(decoder_bias).shape()
            );
        }
        let decoder_weight = match (config.tie_weights, params.id(param_names::DECODER_WEIGHT)) {
            (true, None) => None,
            (false, Some(id)) => {
                if params.get(id).shape() != [config.vocab_size, config.output_dim()] {
                    bail!(Config, "decoder weight shape {:?}", params.get(id).shape());
                }
                Some(id)
            }
            (true, Some(_)) => bail!(Config, "tied model carries a separate decoder weight"),
            (false, None) => bail!(
                Config,
                "untied model is missing `{}`",
                param_names::DECODER_WEIGHT
            ),
        };
        let expected = if config.tie_weights { 2 } else { 3 } + 3 * config.n_layers;
        if params.len() != expected {
            bail!(
                Config,
                "language model expects {} tensors, found {}",
                expected,
                params.len()
            );
        }
        Ok(AwdLstm {
            config,
            params,
            encoder,
            decoder_bias,
            decoder_weight,
        })
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet<S> {
        self.params
    }

    pub fn encoder_ids(&self) -> &EncoderIds {
        &self.encoder
    }

    pub fn cast<T: Scalar>(&self) -> AwdLstm<T> {
        AwdLstm {
            config: self.config.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            decoder_bias: self.decoder_bias,
            decoder_weight: self.decoder_weight,
        }
    }

    /// Logits `[L * B, V]` (step-major rows) for a block given step-major ids.
    pub fn logits_var<'a>(
        &'a self,
        g: &mut Graph<'a, S>,
        ids: &[usize],
        batch: usize,
        state: &LstmState<S>,
        masks: Option<&EncoderMasks<S>>,
    ) -> Result<(Var, LstmState<S>)> {
        check_ids(ids, self.config.vocab_size)?;
        let enc = encode(g, &self.config, &self.encoder, ids, batch, state, masks)?;
        let steps = enc.steps.len();
        let mut top = g.concat_rows(&enc.steps)?;
        if let Some(mask) = masks.and_then(|m| m.output.as_ref()) {
            top = g.mask(top, &tile(mask, steps))?;
        }
        let w = g.param(self.decoder_weight.unwrap_or(self.encoder.embedding));
        let b = g.param(self.decoder_bias);
        let logits = g.affine(top, w, Some(b), true)?;
        Ok((logits, enc.state))
    }

    /// Mean next-token cross-entropy of a block.
    pub fn block_loss<'a>(
        &'a self,
        g: &mut Graph<'a, S>,
        block: &Block,
        state: &LstmState<S>,
        masks: Option<&EncoderMasks<S>>,
    ) -> Result<(Var, LstmState<S>)> {
        let ids: Vec<usize> = (0..block.len).flat_map(|t| block.step_inputs(t)).collect();
        check_ids(&block.targets, self.config.vocab_size)?;
        let (logits, state) = self.logits_var(g, &ids, block.batch, state, masks)?;
        let loss = g.softmax_cross_entropy(logits, &block.targets_step_major())?;
        Ok((loss, state))
    }

    /// Deterministic forward pass (no dropout) over batch-major inputs
    /// `[B, L]`. Returns logits `[B, L, V]` and the state after the block.
    pub fn forward(
        &self,
        inputs: &[usize],
        batch: usize,
        state: &LstmState<S>,
    ) -> Result<(Tensor<S>, LstmState<S>)> {
        if batch == 0 || inputs.is_empty() || inputs.len() % batch != 0 {
            bail!(
                Shape,
                "{} ids do not form a [{}, L] block",
                inputs.len(),
                batch
            );
        }
        let len = inputs.len() / batch;
        let ids: Vec<usize> = (0..len)
            .flat_map(|t| (0..batch).map(move |b| inputs[b * len + t]))
            .collect();
        let mut g = Graph::new(&self.params);
        let (logits, state) = self.logits_var(&mut g, &ids, batch, state, None)?;
        let v = self.config.vocab_size;
        let flat = g.value(logits).data();
        let mut out = Vec::with_capacity(flat.len());
        for b in 0..batch {
            for t in 0..len {
                let row = t * batch + b;
                out.extend_from_slice(&flat[row * v..(row + 1) * v]);
            }
        }
        Ok((Tensor::from_vec(&[batch, len, v], out)?, state))
    }

    /// Summed next-token cross-entropy (in f64) and the number of predicted
    /// tokens, over a single lane with state carried between windows.
    pub fn stream_loss(&self, stream: &[usize]) -> Result<(f64, usize)> {
        if stream.len() < 2 {
            bail!(
                Data,
                "perplexity needs at least two tokens, got {}",
                stream.len()
            );
        }
        check_ids(stream, self.config.vocab_size)?;
        let mut state = LstmState::zeros(&self.config, 1);
        let mut total = 0.0;
        let mut count = 0;
        let window = self.config.bptt_len;
        let mut start = 0;
        while start + 1 < stream.len() {
            let end = (start + window).min(stream.len() - 1);
            let mut g = Graph::new(&self.params);
            let (logits, next) = self.logits_var(&mut g, &stream[start..end], 1, &state, None)?;
            let loss = g.softmax_cross_entropy(logits, &stream[start + 1..end + 1])?;
            total += g.value(loss).data()[0].to_f64() * (end - start) as f64;
            count += end - start;
            state = next;
            start = end;
        }
        Ok((total, count))
    }

    /// `exp` of the mean next-token cross-entropy, dropout off.
    pub fn perplexity(&self, stream: &[usize]) -> Result<f64> {
        let (total, count) = self.stream_loss(stream)?;
        Ok(libm::exp(total / count as f64))
    }
}

/// Free-function form of [`AwdLstm::forward`] taking a block's inputs.
pub fn lm_forward<S: Scalar>(
    model: &AwdLstm<S>,
    block: &Block,
    state: &LstmState<S>,
) -> Result<(Tensor<S>, LstmState<S>)> {
    model.forward(&block.inputs, block.batch, state)
}
