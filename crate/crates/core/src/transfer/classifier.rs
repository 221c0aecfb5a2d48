use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FineTunePlan, HeadKind, LayerGroups, PlanStage, Schedule};
use crate::corpus::{
    clean_text, require_labels, tokenize, CleanProfile, CleanTweet, Label, Vocabulary, PAD,
};
use crate::error::{bail, Result};
use crate::lm::{
    check_ids, encode, group_lrs, param_names, resolve_schedule, AwdLstm, Checkpoint, Dropouts,
    EncoderIds, EncoderMasks, EpochRecord, HeadSpec, LmConfig, LstmState, Stage, StepRecord,
    TrainingLog,
};
use crate::numerics::{
    adam_step, dropout_mask, softmax_rows, streams, AdamConfig, DropoutKind, Graph, OptimizerState,
    ParamId, ParamSet, RngStream, Scalar, Tensor, Var, CLIP_NORM,
};

/// Hidden width of the classifier head.
pub const HEAD_HIDDEN: usize = 50;
pub const CLASSES: usize = 2;
/// Base probability of the dropout after the hidden head layer.
const HEAD_HIDDEN_DROPOUT: f64 = 0.1;

/// Encoder plus concat-pooling head:
/// `[last | max | mean]` (`3 * D`) -> `hidden` (ReLU) -> 2 logits.
#[derive(Debug, Clone)]
pub struct ClassifierModel<S = f32> {
    config: LmConfig,
    vocab: Vocabulary,
    head: HeadSpec,
    params: ParamSet<S>,
    encoder: EncoderIds,
    head_ids: [ParamId; 4],
}

/// Dropout masks for one classifier step.
pub(crate) struct ClassifierMasks<S> {
    encoder: EncoderMasks<S>,
    pooled: Option<Tensor<S>>,
    hidden: Option<Tensor<S>>,
}

/// Class probabilities for one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub related: f64,
    pub unrelated: f64,
    /// The text cleaned to nothing; only `<bos> <eos>` was classified.
    pub empty_input: bool,
}

impl Prediction {
    pub fn label(&self) -> Label {
        if self.related >= self.unrelated {
            Label::Related
        } else {
            Label::Unrelated
        }
    }
}

fn head_params<S: Scalar>(
    params: &mut ParamSet<S>,
    pooled: usize,
    hidden: usize,
    rng: &mut RngStream,
) -> Result<[ParamId; 4]> {
    let mut layer = |shape: &[usize], fan_in: usize| -> Tensor<S> {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| S::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Tensor::from_vec(shape, data).expect("nonzero head shape")
    };
    let w1 = layer(&[pooled, hidden], pooled);
    let b1 = layer(&[hidden], pooled);
    let w2 = layer(&[hidden, CLASSES], hidden);
    let b2 = layer(&[CLASSES], hidden);
    let [n1, n2, n3, n4] = param_names::HEAD;
    Ok([
        params.add(n1, w1)?,
        params.add(n2, b1)?,
        params.add(n3, w2)?,
        params.add(n4, b2)?,
    ])
}

/// Left-pads sequences to a common length. Returns step-major ids and the
/// `valid[b * L + t]` mask.
pub fn pad_left(seqs: &[Vec<usize>]) -> Result<(Vec<usize>, Vec<bool>, usize)> {
    let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
    if len == 0 || seqs.iter().any(Vec::is_empty) {
        bail!(Data, "cannot classify an empty sequence");
    }
    let batch = seqs.len();
    let mut ids = Vec::with_capacity(batch * len);
    for t in 0..len {
        for s in seqs {
            let offset = len - s.len();
            ids.push(if t < offset { PAD } else { s[t - offset] });
        }
    }
    let mut valid = Vec::with_capacity(batch * len);
    for s in seqs {
        let offset = len - s.len();
        valid.extend((0..len).map(|t| t >= offset));
    }
    Ok((ids, valid, len))
}

/// Builds a classifier from a language-model checkpoint: encoder weights are
/// copied, the decoder dropped, and a fresh head drawn from `seed`.
pub fn build_classifier(
    encoder: &Checkpoint,
    head_hidden: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    if encoder.stage == Stage::Classifier {
        bail!(
            Config,
            "build_classifier needs a pretrained or fine-tuned language model"
        );
    }
    let source = encoder.param_set()?;
    ClassifierModel::assemble(
        encoder.config.clone(),
        encoder.vocab.clone(),
        &source,
        head_hidden,
        seed,
    )
}

impl<S: Scalar> ClassifierModel<S> {
    fn assemble(
        config: LmConfig,
        vocab: Vocabulary,
        source: &ParamSet<S>,
        head_hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if head_hidden == 0 {
            bail!(Config, "head_hidden must be positive");
        }
        let src = EncoderIds::lookup(source, &config)?;
        let mut params = ParamSet::new();
        let mut copy = |id: ParamId| params.add(source.name(id), source.get(id).clone());
        let embedding = copy(src.embedding)?;
        let mut layers = Vec::new();
        for l in &src.layers {
            layers.push(crate::lm::LayerIds {
                w_ih: copy(l.w_ih)?,
                w_hh: copy(l.w_hh)?,
                bias: copy(l.bias)?,
            });
        }
        let mut rng = RngStream::new(seed, streams::HEAD_INIT);
        let head_ids = head_params(&mut params, 3 * config.output_dim(), head_hidden, &mut rng)?;
        Ok(ClassifierModel {
            encoder: EncoderIds { embedding, layers },
            head: HeadSpec {
                hidden: head_hidden,
                classes: CLASSES,
            },
            config,
            vocab,
            params,
            head_ids,
        })
    }

    /// Same architecture with a randomly initialized encoder.
    pub fn from_scratch(
        config: LmConfig,
        vocab: Vocabulary,
        head_hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let lm = AwdLstm::<S>::new(config.clone(), seed)?;
        Self::assemble(config, vocab, lm.params(), head_hidden, seed)
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn head(&self) -> &HeadSpec {
        &self.head
    }

    pub fn params(&self) -> &ParamSet<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<S> {
        &mut self.params
    }

    /// Width of the pooled feature fed to the head.
    pub fn head_input_dim(&self) -> usize {
        self.params.get(self.head_ids[0]).shape()[0]
    }

    pub fn layer_groups(&self) -> LayerGroups {
        LayerGroups::new(&self.config, HeadKind::Classifier)
    }

    fn draw_masks(
        &self,
        dropout_mult: f64,
        batch: usize,
        rng: &mut RngStream,
    ) -> Result<Option<ClassifierMasks<S>>> {
        let dropouts = Dropouts::scaled(dropout_mult);
        if dropouts.is_zero() {
            return Ok(None);
        }
        let encoder = EncoderMasks::draw(&self.config, &dropouts, batch, rng)?;
        let pooled = dropout_mask(
            DropoutKind::Standard,
            dropouts.output,
            &[batch, self.head_input_dim()],
            rng,
        )?;
        let p2 = HEAD_HIDDEN_DROPOUT * dropout_mult;
        let hidden = dropout_mask(DropoutKind::Standard, p2, &[batch, self.head.hidden], rng)?;
        Ok(Some(ClassifierMasks {
            encoder,
            pooled: Some(pooled),
            hidden: Some(hidden),
        }))
    }

    /// Logits `[B, 2]` for a batch of id sequences.
    pub(crate) fn logits<'a>(
        &'a self,
        g: &mut Graph<'a, S>,
        seqs: &[Vec<usize>],
        masks: Option<&ClassifierMasks<S>>,
    ) -> Result<Var> {
        let (ids, valid, _) = pad_left(seqs)?;
        check_ids(&ids, self.config.vocab_size)?;
        let batch = seqs.len();
        let state = LstmState::zeros(&self.config, batch);
        let enc = encode(
            g,
            &self.config,
            &self.encoder,
            &ids,
            batch,
            &state,
            masks.map(|m| &m.encoder),
        )?;
        let mut x = g.concat_pool(&enc.steps, &valid)?;
        if let Some(m) = masks.and_then(|m| m.pooled.as_ref()) {
            x = g.mask(x, m)?;
        }
        let [w1, b1, w2, b2] = self.head_ids.map(|id| g.param(id));
        let mut h = g.affine(x, w1, Some(b1), false)?;
        h = g.relu(h)?;
        if let Some(m) = masks.and_then(|m| m.hidden.as_ref()) {
            h = g.mask(h, m)?;
        }
        g.affine(h, w2, Some(b2), false)
    }

    /// Concat-pooled encoder features `[last | max | mean]` per sequence,
    /// dropout off.
    pub fn features(&self, seqs: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(seqs.len());
        for s in seqs {
            let (ids, valid, _) = pad_left(core::slice::from_ref(s))?;
            check_ids(&ids, self.config.vocab_size)?;
            let mut g = Graph::new(&self.params);
            let state = LstmState::zeros(&self.config, 1);
            let enc = encode(&mut g, &self.config, &self.encoder, &ids, 1, &state, None)?;
            let pooled = g.concat_pool(&enc.steps, &valid)?;
            out.push(g.value(pooled).data().iter().map(|v| v.to_f64()).collect());
        }
        Ok(out)
    }

    /// Class probabilities (`[related, unrelated]` per row) with dropout off.
    /// Sequences are grouped by length so no padding is ever needed and the
    /// result for one input never depends on the others.
    pub fn probabilities(&self, seqs: &[Vec<usize>]) -> Result<Vec<[f64; 2]>> {
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        order.sort_by_key(|&i| (seqs[i].len(), i));
        let mut out = alloc::vec![[0.0; 2]; seqs.len()];
        let mut start = 0;
        while start < order.len() {
            let len = seqs[order[start]].len();
            let mut end = start;
            while end < order.len() && seqs[order[end]].len() == len && end - start < 64 {
                end += 1;
            }
            let batch: Vec<Vec<usize>> =
                order[start..end].iter().map(|&i| seqs[i].clone()).collect();
            let mut g = Graph::new(&self.params);
            let logits = self.logits(&mut g, &batch, None)?;
            let probs = softmax_rows(g.value(logits).data(), CLASSES);
            for (k, &i) in order[start..end].iter().enumerate() {
                let related = probs[k * CLASSES + Label::Related.class_index()].to_f64();
                let unrelated = probs[k * CLASSES + Label::Unrelated.class_index()].to_f64();
                out[i] = [related, unrelated];
            }
            start = end;
        }
        Ok(out)
    }

    /// `P(Related)` for every tweet.
    pub fn scores(&self, tweets: &[CleanTweet]) -> Result<Vec<f64>> {
        let seqs: Vec<Vec<usize>> = tweets
            .iter()
            .map(|t| self.vocab.numericalize(t, true))
            .collect();
        Ok(self
            .probabilities(&seqs)?
            .into_iter()
            .map(|p| p[0])
            .collect())
    }

    /// Mean cross-entropy on labeled tweets, dropout off.
    pub fn loss(&self, tweets: &[CleanTweet]) -> Result<f64> {
        require_labels(tweets)?;
        if tweets.is_empty() {
            bail!(Data, "loss over zero examples");
        }
        let seqs: Vec<Vec<usize>> = tweets
            .iter()
            .map(|t| self.vocab.numericalize(t, true))
            .collect();
        let probs = self.probabilities(&seqs)?;
        let total: f64 = tweets
            .iter()
            .zip(&probs)
            .map(|(t, p)| {
                let p = if t.label == Some(Label::Related) {
                    p[0]
                } else {
                    p[1]
                };
                -libm::log(p.max(f64::MIN_POSITIVE))
            })
            .sum();
        Ok(total / tweets.len() as f64)
    }

    /// Classifies raw text under the model cleaning profile.
    pub fn predict(&self, text: &str) -> Result<Prediction> {
        let tokens = tokenize(&clean_text(text, CleanProfile::Model));
        let ids = self.vocab.encode(&tokens, true);
        let p = self.probabilities(&[ids])?[0];
        Ok(Prediction {
            related: p[0],
            unrelated: p[1],
            empty_input: tokens.is_empty(),
        })
    }
}

impl ClassifierModel<f32> {
    pub fn to_checkpoint(&self, log: TrainingLog) -> Checkpoint {
        Checkpoint::new(
            Stage::Classifier,
            self.config.clone(),
            Some(self.head.clone()),
            self.vocab.clone(),
            &self.params,
            log,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.stage != Stage::Classifier {
            bail!(
                Config,
                "checkpoint holds a language model, not a classifier"
            );
        }
        let Some(head) = ckpt.head.clone() else {
            bail!(Config, "classifier checkpoint without a head description");
        };
        if head.classes != CLASSES {
            bail!(
                Config,
                "only {}-class heads are supported, found {}",
                CLASSES,
                head.classes
            );
        }
        let params = ckpt.param_set()?;
        let encoder = EncoderIds::lookup(&params, &ckpt.config)?;
        let mut head_ids = [ParamId(0); 4];
        for (slot, name) in head_ids.iter_mut().zip(param_names::HEAD) {
            *slot = params.require(name)?;
        }
        let pooled = 3 * ckpt.config.output_dim();
        let shapes: [&[usize]; 4] = [
            &[pooled, head.hidden],
            &[head.hidden],
            &[head.hidden, CLASSES],
            &[CLASSES],
        ];
        for (id, want) in head_ids.iter().zip(shapes) {
            if params.get(*id).shape() != want {
                bail!(
                    Config,
                    "head tensor `{}` has shape {:?}",
                    params.name(*id),
                    params.get(*id).shape()
                );
            }
        }
        let model = ClassifierModel {
            config: ckpt.config.clone(),
            vocab: ckpt.vocab.clone(),
            head,
            params,
            encoder,
            head_ids,
        };
        model.layer_groups().assign(&model.params)?;
        Ok(model)
    }
}

/// Free-function form of [`ClassifierModel::predict`].
pub fn predict<S: Scalar>(model: &ClassifierModel<S>, text: &str) -> Result<Prediction> {
    model.predict(text)
}

/// Trains the classifier with slanted triangular rates, discriminative group
/// rates and the plan's unfreezing policy. `on_epoch` sees the model after
/// every epoch.
///
/// Frozen groups get no optimizer update at all, so their parameters stay
/// bit-identical. On a numerical failure the parameters roll back to the
/// last completed epoch.
pub fn train_classifier<S, F>(
    model: &mut ClassifierModel<S>,
    train: &[CleanTweet],
    plan: &FineTunePlan,
    seed: u64,
    mut on_epoch: F,
) -> Result<TrainingLog>
where
    S: Scalar,
    F: FnMut(&EpochRecord, &ClassifierModel<S>),
{
    let groups = model.layer_groups();
    plan.validate(PlanStage::Classifier, groups.len())?;
    require_labels(train)?;
    if train.is_empty() {
        bail!(Data, "no labeled examples to train on");
    }
    let assignment = groups.assign(&model.params)?;
    let seqs: Vec<Vec<usize>> = train
        .iter()
        .map(|t| model.vocab.numericalize(t, true))
        .collect();
    let targets: Vec<usize> = train
        .iter()
        .map(|t| t.label.expect("checked above").class_index())
        .collect();
    let per_epoch = train.len().div_ceil(plan.batch_size);
    let schedule = resolve_schedule(Schedule::Slanted(plan.stlr), plan.epochs * per_epoch);
    let mut optim = OptimizerState::new(&model.params, AdamConfig::default());
    let mut shuffle = RngStream::new(seed, streams::SHUFFLE);
    let mut drop_rng = RngStream::new(seed, streams::DROPOUT);
    let mut log = TrainingLog::default();
    let mut step = 0;
    for epoch in 0..plan.epochs {
        let frozen = plan
            .unfreeze_policy
            .frozen_at(plan.frozen_groups_initial, epoch);
        let last_good = model.params.clone();
        let order = shuffle.permutation(train.len());
        let mut sum = 0.0;
        for chunk in order.chunks(plan.batch_size) {
            let outcome = (|| -> Result<f64> {
                let batch: Vec<Vec<usize>> = chunk.iter().map(|&i| seqs[i].clone()).collect();
                let batch_targets: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
                let masks = model.draw_masks(plan.dropout_mult, chunk.len(), &mut drop_rng)?;
                let mut grads = model.params.zero_grads();
                let loss = {
                    let mut g = Graph::new(&model.params);
                    let logits = model.logits(&mut g, &batch, masks.as_ref())?;
                    let loss = g.softmax_cross_entropy(logits, &batch_targets)?;
                    g.backward(loss, &mut grads)?;
                    g.value(loss).data()[0].to_f64()
                };
                grads.clip_global_norm(CLIP_NORM);
                let lr = schedule.lr(step)?;
                let per_group = group_lrs(lr, groups.len(), Some(plan.disc_factor), frozen);
                let per_param: Vec<Option<f64>> =
                    assignment.iter().map(|&g| per_group[g]).collect();
                adam_step(&mut model.params, &grads, &mut optim, &per_param)?;
                for (group, lr) in per_group.iter().enumerate() {
                    if let Some(lr) = lr {
                        log.steps.push(StepRecord {
                            step,
                            group,
                            lr: *lr,
                            loss,
                        });
                    }
                }
                Ok(loss)
            })();
            match outcome {
                Ok(loss) => sum += loss * chunk.len() as f64,
                Err(e) => {
                    model.params = last_good;
                    return Err(e);
                }
            }
            step += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / train.len() as f64,
            heldout_perplexity: None,
            frozen_groups: frozen,
        };
        on_epoch(&record, model);
        log.epochs.push(record);
    }
    Ok(log)
}
