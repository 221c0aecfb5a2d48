use alloc::vec::Vec;

use super::ClassifierModel;
use crate::corpus::{require_labels, CleanTweet};
use crate::error::{bail, Result};
use crate::numerics::{
    adam_step, streams, AdamConfig, Graph, OptimizerState, RngStream, Scalar, CLIP_NORM,
};

/// Anything that can take one optimizer step at a given learning rate and
/// report the loss it saw.
pub trait LrProbe {
    fn probe_step(&mut self, lr: f64) -> Result<f64>;
}

/// `n_points` learning rates spaced geometrically from `lr_min` to `lr_max`.
pub fn lr_grid(lr_min: f64, lr_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(lr_min > 0.0 && lr_min < lr_max && lr_max.is_finite()) {
        bail!(
            Config,
            "learning-rate range [{}, {}] is not a positive increasing interval",
            lr_min,
            lr_max
        );
    }
    if n_points < 2 {
        bail!(Config, "need at least two grid points, got {}", n_points);
    }
    let ratio = libm::pow(lr_max / lr_min, 1.0 / (n_points - 1) as f64);
    Ok((0..n_points)
        .map(|i| {
            if i + 1 == n_points {
                lr_max
            } else {
                lr_min * libm::pow(ratio, i as f64)
            }
        })
        .collect())
}

/// One probe step per grid point; losses are exponentially smoothed
/// (`beta = 0.98`, bias-corrected).
pub fn lr_range_test<P: LrProbe>(
    probe: &mut P,
    lr_min: f64,
    lr_max: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    const BETA: f64 = 0.98;
    let grid = lr_grid(lr_min, lr_max, n_points)?;
    let mut avg = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for (i, lr) in grid.into_iter().enumerate() {
        let loss = probe.probe_step(lr)?;
        avg = BETA * avg + (1.0 - BETA) * loss;
        out.push((lr, avg / (1.0 - libm::pow(BETA, (i + 1) as f64))));
    }
    Ok(out)
}

/// Classifier probe working on its own copy of the model.
pub struct ClassifierProbe<S: Scalar> {
    model: ClassifierModel<S>,
    seqs: Vec<Vec<usize>>,
    targets: Vec<usize>,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: RngStream,
    optim: OptimizerState<S>,
}

impl<S: Scalar> ClassifierProbe<S> {
    pub fn new(
        model: &ClassifierModel<S>,
        data: &[CleanTweet],
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        require_labels(data)?;
        if data.is_empty() || batch_size == 0 {
            bail!(Config, "probe needs data and a positive batch size");
        }
        let model = model.clone();
        let seqs = data
            .iter()
            .map(|t| model.vocab().numericalize(t, true))
            .collect();
        let targets = data
            .iter()
            .map(|t| t.label.expect("checked").class_index())
            .collect();
        let optim = OptimizerState::new(model.params(), AdamConfig::default());
        let mut rng = RngStream::new(seed, streams::SHUFFLE);
        let order = rng.permutation(data.len());
        Ok(ClassifierProbe {
            model,
            seqs,
            targets,
            batch_size,
            order,
            cursor: 0,
            rng,
            optim,
        })
    }

    pub fn model(&self) -> &ClassifierModel<S> {
        &self.model
    }
}

impl<S: Scalar> LrProbe for ClassifierProbe<S> {
    fn probe_step(&mut self, lr: f64) -> Result<f64> {
        if self.cursor >= self.order.len() {
            self.order = self.rng.permutation(self.seqs.len());
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        self.cursor = end;
        let batch: Vec<Vec<usize>> = idx.iter().map(|&i| self.seqs[i].clone()).collect();
        let targets: Vec<usize> = idx.iter().map(|&i| self.targets[i]).collect();
        let mut grads = self.model.params().zero_grads();
        let loss = {
            let mut g = Graph::new(self.model.params());
            let logits = self.model.logits(&mut g, &batch, None)?;
            let loss = g.softmax_cross_entropy(logits, &targets)?;
            g.backward(loss, &mut grads)?;
            g.value(loss).data()[0].to_f64()
        };
        grads.clip_global_norm(CLIP_NORM);
        let lrs = alloc::vec![Some(lr); self.model.params().len()];
        adam_step(self.model.params_mut(), &grads, &mut self.optim, &lrs)?;
        Ok(loss)
    }
}

/// Learning-rate range test on a throwaway copy of `model`.
pub fn classifier_lr_range_test<S: Scalar>(
    model: &ClassifierModel<S>,
    data: &[CleanTweet],
    lr_min: f64,
    lr_max: f64,
    n_points: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    lr_grid(lr_min, lr_max, n_points)?;
    let mut probe = ClassifierProbe::new(model, data, batch_size, seed)?;
    lr_range_test(&mut probe, lr_min, lr_max, n_points)
}
