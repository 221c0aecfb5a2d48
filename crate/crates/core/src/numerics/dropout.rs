use alloc::vec::Vec;

use super::{RngStream, Scalar, Tensor};
use crate::error::{bail, Result};

/// Where a dropout mask is applied in the recurrent network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutKind {
    /// Fresh iid mask for every use.
    Standard,
    /// One `[B, D]` mask per sequence, reused at every time step.
    Locked,
    /// Whole vocabulary rows of the embedding are zeroed.
    EmbeddingRow,
    /// DropConnect on a recurrent weight matrix, drawn once per forward pass.
    WeightDrop,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        bail!(Config, "dropout probability {} outside [0, 1)", p);
    }
    Ok(())
}

fn keep_values<S: Scalar>(p: f64, n: usize, rng: &mut RngStream) -> Vec<S> {
    let scale = S::from_f64(1.0 / (1.0 - p));
    if p == 0.0 {
        return alloc::vec![S::ONE; n];
    }
    (0..n)
        .map(|_| if rng.next_f64() >= p { scale } else { S::ZERO })
        .collect()
}

/// Bernoulli keep-mask scaled by `1 / (1 - p)`.
///
/// For [`DropoutKind::EmbeddingRow`] the shape is `[V, D]` and every row is
/// either all zeros or all `1 / (1 - p)`. `p = 0` always yields ones and
/// consumes no randomness.
pub fn dropout_mask<S: Scalar>(
    kind: DropoutKind,
    p: f64,
    shape: &[usize],
    rng: &mut RngStream,
) -> Result<Tensor<S>> {
    check_p(p)?;
    let n: usize = shape.iter().product();
    let data = match kind {
        DropoutKind::EmbeddingRow => {
            if shape.len() != 2 {
                bail!(Shape, "embedding-row mask needs [V, D], got {:?}", shape);
            }
            let rows = row_scales::<S>(p, shape[0], rng)?;
            rows.iter()
                .flat_map(|&s| core::iter::repeat_n(s, shape[1]))
                .collect()
        }
        DropoutKind::Standard | DropoutKind::Locked | DropoutKind::WeightDrop => {
            keep_values(p, n, rng)
        }
    };
    Tensor::from_vec(shape, data)
}

/// Per-row scales for embedding dropout: one entry per vocabulary row.
pub fn row_scales<S: Scalar>(p: f64, rows: usize, rng: &mut RngStream) -> Result<Vec<S>> {
    check_p(p)?;
    Ok(keep_values(p, rows, rng))
}

/// Variational dropout: the mask is drawn once for a sequence and returned
/// unchanged for every time step.
#[derive(Debug, Clone)]
pub struct LockedDropout<S> {
    mask: Tensor<S>,
}

impl<S: Scalar> LockedDropout<S> {
    pub fn new(p: f64, batch: usize, dim: usize, rng: &mut RngStream) -> Result<Self> {
        Ok(LockedDropout {
            mask: dropout_mask(DropoutKind::Locked, p, &[batch, dim], rng)?,
        })
    }

    pub fn at(&self, _step: usize) -> &Tensor<S> {
        &self.mask
    }
}
