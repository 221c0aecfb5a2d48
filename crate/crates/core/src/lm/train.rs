use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::encoder::{EncoderMasks, LstmState};
use super::{batchify, AwdLstm, Dropouts};
use crate::error::{bail, Result};
use crate::numerics::{
    adam_step, streams, AdamConfig, Graph, OptimizerState, RngStream, Scalar, CLIP_NORM,
};
use crate::transfer::{HeadKind, LayerGroups, Schedule, StlrConfig, UnfreezePolicy};

/// Per-epoch summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_perplexity: Option<f64>,
    pub frozen_groups: usize,
}

/// Learning rate applied to one group at one optimizer step, with the
/// step's loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub group: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
}

/// Options for a truncated-BPTT language-model run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmTrainOptions {
    pub epochs: usize,
    pub schedule: Schedule,
    /// `Some(f)`: group `k` below the head trains at `lr / f^k`.
    pub disc_factor: Option<f64>,
    pub dropouts: Dropouts,
    pub clip: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    pub unfreeze: UnfreezePolicy,
    /// Deepest groups frozen at the start of the run.
    pub frozen_initial: usize,
}

impl LmTrainOptions {
    /// Constant learning rate, no discriminative scaling: general-domain
    /// pretraining.
    pub fn pretraining(model_config: &super::LmConfig, seed: u64) -> Self {
        LmTrainOptions {
            epochs: model_config.epochs,
            schedule: Schedule::Constant {
                lr: model_config.base_lr,
            },
            disc_factor: None,
            dropouts: model_config.dropouts,
            clip: CLIP_NORM,
            adam: AdamConfig::default(),
            seed,
            unfreeze: UnfreezePolicy::AllAtOnce,
            frozen_initial: 0,
        }
    }
}

/// Learning rate of every group at one step, `None` for frozen groups.
/// Group 0 is the deepest; the head (last group) gets `lr`.
pub(crate) fn group_lrs(
    lr: f64,
    n_groups: usize,
    disc_factor: Option<f64>,
    frozen: usize,
) -> Vec<Option<f64>> {
    (0..n_groups)
        .map(|g| {
            if g < frozen {
                return None;
            }
            let depth = (n_groups - 1 - g) as i32;
            Some(match disc_factor {
                Some(f) => lr / libm::pow(f, depth as f64),
                None => lr,
            })
        })
        .collect()
}

/// Fills in the step count of a slanted schedule.
pub(crate) fn resolve_schedule(schedule: Schedule, total_steps: usize) -> Schedule {
    match schedule {
        Schedule::Slanted(cfg) => Schedule::Slanted(StlrConfig { total_steps, ..cfg }),
        other => other,
    }
}

/// Trains `model` on a token stream with carried, detached state.
///
/// On a numerical failure the parameters are rolled back to the end of the
/// last completed epoch before the error is returned.
pub fn train_lm<S: Scalar>(
    model: &mut AwdLstm<S>,
    train: &[usize],
    heldout: Option<&[usize]>,
    opts: &LmTrainOptions,
) -> Result<TrainingLog> {
    let config = model.config().clone();
    opts.dropouts.validate()?;
    if let Some(f) = opts.disc_factor {
        if !(f > 1.0) {
            bail!(Config, "discriminative factor must exceed 1, got {}", f);
        }
    }
    let mut log = TrainingLog::default();
    if opts.epochs == 0 {
        return Ok(log);
    }
    let blocks = batchify(train, config.batch_size, config.bptt_len)?;
    let total = opts.epochs * blocks.len();
    let schedule = resolve_schedule(opts.schedule, total);
    let groups = LayerGroups::new(&config, HeadKind::Decoder);
    let assignment = groups.assign(model.params())?;
    let mut optim = OptimizerState::new(model.params(), opts.adam);
    let mut rng = RngStream::new(opts.seed, streams::DROPOUT);
    let mut step = 0;
    for epoch in 0..opts.epochs {
        let last_good = model.params().clone();
        let frozen = opts.unfreeze.frozen_at(opts.frozen_initial, epoch);
        let outcome = run_epoch(
            model,
            &blocks,
            &schedule,
            &assignment,
            (groups.len(), frozen),
            opts,
            &mut optim,
            &mut rng,
            &mut step,
            &mut log,
        );
        let train_loss = match outcome {
            Ok(loss) => loss,
            Err(e) => {
                *model.params_mut() = last_good;
                return Err(e);
            }
        };
        let heldout_perplexity = match heldout {
            Some(h) => Some(model.perplexity(h)?),
            None => None,
        };
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            heldout_perplexity,
            frozen_groups: frozen,
        });
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn run_epoch<S: Scalar>(
    model: &mut AwdLstm<S>,
    blocks: &[super::Block],
    schedule: &Schedule,
    assignment: &[usize],
    (n_groups, frozen): (usize, usize),
    opts: &LmTrainOptions,
    optim: &mut OptimizerState<S>,
    rng: &mut RngStream,
    step: &mut usize,
    log: &mut TrainingLog,
) -> Result<f64> {
    let config = model.config().clone();
    let mut state = LstmState::zeros(&config, config.batch_size);
    let mut sum = 0.0;
    for block in blocks {
        let masks = if opts.dropouts.is_zero() {
            None
        } else {
            Some(EncoderMasks::draw(
                &config,
                &opts.dropouts,
                config.batch_size,
                rng,
            )?)
        };
        let mut grads = model.params().zero_grads();
        let (loss, next) = {
            let mut g = Graph::new(model.params());
            let (loss, next) = model.block_loss(&mut g, block, &state, masks.as_ref())?;
            g.backward(loss, &mut grads)?;
            (g.value(loss).data()[0].to_f64(), next)
        };
        state = next;
        grads.clip_global_norm(opts.clip);
        let lr = schedule.lr(*step)?;
        let per_group = group_lrs(lr, n_groups, opts.disc_factor, frozen);
        let per_param: Vec<Option<f64>> = assignment.iter().map(|&g| per_group[g]).collect();
        adam_step(model.params_mut(), &grads, optim, &per_param)?;
        for (group, lr) in per_group.iter().enumerate() {
            if let Some(lr) = lr {
                log.steps.push(StepRecord {
                    step: *step,
                    group,
                    lr: *lr,
                    loss,
                });
            }
        }
        sum += loss;
        *step += 1;
    }
    Ok(sum / blocks.len() as f64)
}
