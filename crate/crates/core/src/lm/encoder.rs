//! The stacked-LSTM encoder shared by the language model and the classifier.

use alloc::vec::Vec;

use super::{Dropouts, LmConfig};
use crate::error::{bail, Result};
use crate::numerics::{
    dropout_mask, row_scales, DropoutKind, Graph, ParamId, ParamSet, RngStream, Scalar, Tensor, Var,
};

/// Canonical parameter names.
pub mod param_names {
    pub const EMBEDDING: &str = "encoder.embedding";
    pub const DECODER_BIAS: &str = "decoder.bias";
    pub const DECODER_WEIGHT: &str = "decoder.weight";
    pub const HEAD: [&str; 4] = ["head.w1", "head.b1", "head.w2", "head.b2"];

    pub fn w_ih(layer: usize) -> alloc::string::String {
        alloc::format!("encoder.rnn.{}.w_ih", layer)
    }

    pub fn w_hh(layer: usize) -> alloc::string::String {
        alloc::format!("encoder.rnn.{}.w_hh", layer)
    }

    pub fn bias(layer: usize) -> alloc::string::String {
        alloc::format!("encoder.rnn.{}.bias", layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerIds {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
}

/// Handles of the encoder parameters inside a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderIds {
    pub embedding: ParamId,
    pub layers: Vec<LayerIds>,
}

/// Added to the forget-gate slice of every LSTM bias at initialization.
pub const FORGET_BIAS: f64 = 1.0;

fn uniform<S: Scalar>(shape: &[usize], bound: f64, rng: &mut RngStream) -> Tensor<S> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| S::from_f64(rng.uniform(-bound, bound)))
        .collect();
    Tensor::from_vec(shape, data).expect("nonzero shape")
}

fn check_shape<S: Scalar>(params: &ParamSet<S>, id: ParamId, want: &[usize]) -> Result<()> {
    let got = params.get(id).shape();
    if got != want {
        bail!(
            Config,
            "parameter `{}` has shape {:?}, expected {:?}",
            params.name(id),
            got,
            want
        );
    }
    Ok(())
}

impl EncoderIds {
    /// Adds freshly initialized encoder parameters: embedding `U(-0.1, 0.1)`,
    /// LSTM weights and biases `U(-1/sqrt(H), 1/sqrt(H))`, forget-gate biases
    /// shifted by [`FORGET_BIAS`].
    pub fn init<S: Scalar>(
        params: &mut ParamSet<S>,
        config: &LmConfig,
        rng: &mut RngStream,
    ) -> Result<EncoderIds> {
        let embedding = params.add(
            param_names::EMBEDDING,
            uniform(&[config.vocab_size, config.emb_dim], 0.1, rng),
        )?;
        let mut layers = Vec::new();
        for (l, (input, hidden)) in config.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / libm::sqrt(hidden as f64);
            let w_ih = params.add(
                &param_names::w_ih(l),
                uniform(&[input, 4 * hidden], bound, rng),
            )?;
            let w_hh = params.add(
                &param_names::w_hh(l),
                uniform(&[hidden, 4 * hidden], bound, rng),
            )?;
            let mut b = uniform::<S>(&[4 * hidden], bound, rng);
            for v in &mut b.data_mut()[hidden..2 * hidden] {
                *v = S::from_f64(v.to_f64() + FORGET_BIAS);
            }
            let bias = params.add(&param_names::bias(l), b)?;
            layers.push(LayerIds { w_ih, w_hh, bias });
        }
        Ok(EncoderIds { embedding, layers })
    }

    /// Finds the encoder parameters by name and checks their shapes.
    pub fn lookup<S: Scalar>(params: &ParamSet<S>, config: &LmConfig) -> Result<EncoderIds> {
        let embedding = params.require(param_names::EMBEDDING)?;
        check_shape(params, embedding, &[config.vocab_size, config.emb_dim])?;
        let mut layers = Vec::new();
        for (l, (input, hidden)) in config.layer_dims().into_iter().enumerate() {
            let ids = LayerIds {
                w_ih: params.require(&param_names::w_ih(l))?,
                w_hh: params.require(&param_names::w_hh(l))?,
                bias: params.require(&param_names::bias(l))?,
            };
            check_shape(params, ids.w_ih, &[input, 4 * hidden])?;
            check_shape(params, ids.w_hh, &[hidden, 4 * hidden])?;
            check_shape(params, ids.bias, &[4 * hidden])?;
            layers.push(ids);
        }
        Ok(EncoderIds { embedding, layers })
    }
}

/// Hidden and cell state of every layer, `[B, H_l]` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<S> {
    pub h: Vec<Tensor<S>>,
    pub c: Vec<Tensor<S>>,
}

impl<S: Scalar> LstmState<S> {
    pub fn zeros(config: &LmConfig, batch: usize) -> Self {
        let dims = config.layer_dims();
        LstmState {
            h: dims
                .iter()
                .map(|&(_, h)| Tensor::zeros(&[batch, h]))
                .collect(),
            c: dims
                .iter()
                .map(|&(_, h)| Tensor::zeros(&[batch, h]))
                .collect(),
        }
    }

    pub fn batch(&self) -> usize {
        self.h[0].rows()
    }
}

/// Every dropout mask for one forward pass over a block.
///
/// Locked masks are `[B, D]` and reused at every step; weight-drop masks are
/// drawn once per pass and applied functionally, so stored weights never
/// change.
#[derive(Debug, Clone)]
pub struct EncoderMasks<S> {
    pub embedding_rows: Option<Vec<S>>,
    pub input: Option<Tensor<S>>,
    pub hidden: Vec<Option<Tensor<S>>>,
    pub weight: Vec<Option<Tensor<S>>>,
    pub output: Option<Tensor<S>>,
}

fn locked<S: Scalar>(
    p: f64,
    batch: usize,
    dim: usize,
    rng: &mut RngStream,
) -> Result<Option<Tensor<S>>> {
    if p == 0.0 {
        return Ok(None);
    }
    Ok(Some(dropout_mask(
        DropoutKind::Locked,
        p,
        &[batch, dim],
        rng,
    )?))
}

impl<S: Scalar> EncoderMasks<S> {
    /// Draws all masks in a fixed order: embedding rows, weight-drop per
    /// layer, input, hidden per layer, output.
    pub fn draw(
        config: &LmConfig,
        dropouts: &Dropouts,
        batch: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        dropouts.validate()?;
        let dims = config.layer_dims();
        let embedding_rows = if dropouts.embedding > 0.0 {
            Some(row_scales(dropouts.embedding, config.vocab_size, rng)?)
        } else {
            None
        };
        let mut weight = Vec::new();
        for &(_, h) in &dims {
            weight.push(if dropouts.weight > 0.0 {
                Some(dropout_mask(
                    DropoutKind::WeightDrop,
                    dropouts.weight,
                    &[h, 4 * h],
                    rng,
                )?)
            } else {
                None
            });
        }
        let input = locked(dropouts.input, batch, config.emb_dim, rng)?;
        let mut hidden = Vec::new();
        for (l, &(_, h)) in dims.iter().enumerate() {
            hidden.push(if l + 1 < dims.len() {
                locked(dropouts.hidden, batch, h, rng)?
            } else {
                None
            });
        }
        let output = locked(dropouts.output, batch, config.output_dim(), rng)?;
        Ok(EncoderMasks {
            embedding_rows,
            input,
            hidden,
            weight,
            output,
        })
    }
}

/// Repeats a `[B, D]` mask `steps` times along rows.
pub(crate) fn tile<S: Scalar>(mask: &Tensor<S>, steps: usize) -> Tensor<S> {
    let mut data = Vec::with_capacity(mask.len() * steps);
    for _ in 0..steps {
        data.extend_from_slice(mask.data());
    }
    Tensor::from_vec(&[mask.rows() * steps, mask.cols()], data).expect("nonempty mask")
}

/// Output of an encoder pass.
pub struct Encoded<S> {
    /// Top-layer output per step, `[B, D_top]`, before output dropout.
    pub steps: Vec<Var>,
    /// Final state, detached.
    pub state: LstmState<S>,
}

/// Runs the encoder over `ids`, given step-major (`t * batch + b`).
///
/// Each layer projects all its inputs with one matrix product and then walks
/// the time steps adding `h W_hh`.
pub fn encode<S: Scalar>(
    g: &mut Graph<'_, S>,
    config: &LmConfig,
    enc: &EncoderIds,
    ids: &[usize],
    batch: usize,
    state: &LstmState<S>,
    masks: Option<&EncoderMasks<S>>,
) -> Result<Encoded<S>> {
    if batch == 0 || ids.is_empty() || ids.len() % batch != 0 {
        bail!(
            Shape,
            "{} ids do not split into a batch of {}",
            ids.len(),
            batch
        );
    }
    if state.h.len() != config.n_layers || state.batch() != batch {
        bail!(
            Shape,
            "state does not match {} layers of batch {}",
            config.n_layers,
            batch
        );
    }
    let steps = ids.len() / batch;
    let table = g.param(enc.embedding);
    let mut x = g.embedding(table, ids, masks.and_then(|m| m.embedding_rows.clone()))?;
    if let Some(mask) = masks.and_then(|m| m.input.as_ref()) {
        x = g.mask(x, &tile(mask, steps))?;
    }
    let mut new_h = Vec::with_capacity(config.n_layers);
    let mut new_c = Vec::with_capacity(config.n_layers);
    let mut outs = Vec::new();
    for (l, layer) in enc.layers.iter().enumerate() {
        let w_ih = g.param(layer.w_ih);
        let bias = g.param(layer.bias);
        let proj = g.affine(x, w_ih, Some(bias), false)?;
        let mut w_hh = g.param(layer.w_hh);
        if let Some(mask) = masks.and_then(|m| m.weight[l].as_ref()) {
            w_hh = g.mask(w_hh, mask)?;
        }
        let mut h = g.constant(state.h[l].clone());
        let mut c = g.constant(state.c[l].clone());
        outs = Vec::with_capacity(steps);
        for t in 0..steps {
            let pre = g.recurrent_gates(proj, t * batch, h, w_hh)?;
            let act = g.gate_activations(pre)?;
            c = g.cell_update(act, c)?;
            h = g.hidden_output(act, c)?;
            outs.push(h);
        }
        new_h.push(g.value(h).clone());
        new_c.push(g.value(c).clone());
        if l + 1 < enc.layers.len() {
            x = g.concat_rows(&outs)?;
            if let Some(mask) = masks.and_then(|m| m.hidden[l].as_ref()) {
                x = g.mask(x, &tile(mask, steps))?;
            }
        }
    }
    Ok(Encoded {
        steps: outs,
        state: LstmState { h: new_h, c: new_c },
    })
}

/// Verifies every id is inside the vocabulary.
pub(crate) fn check_ids(ids: &[usize], vocab_size: usize) -> Result<()> {
    if let Some(&bad) = ids.iter().find(|&&i| i >= vocab_size) {
        bail!(
            Index,
            "token id {} out of range for vocabulary of {}",
            bad,
            vocab_size
        );
    }
    Ok(())
}
