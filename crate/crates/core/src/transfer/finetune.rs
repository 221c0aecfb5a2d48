use alloc::vec::Vec;

use super::{FineTunePlan, HeadKind, LayerGroups, PlanStage, Schedule};
use crate::corpus::CleanTweet;
use crate::error::{bail, Result};
use crate::lm::{train_lm, tweet_stream, Checkpoint, Dropouts, LmTrainOptions, Stage};
use crate::numerics::{AdamConfig, CLIP_NORM};

/// Adapts a language-model checkpoint to target text, given as ids under
/// the checkpoint's vocabulary.
pub fn finetune_lm_stream(
    pretrained: &Checkpoint,
    target: &[usize],
    heldout: Option<&[usize]>,
    plan: &FineTunePlan,
    seed: u64,
) -> Result<Checkpoint> {
    let mut model = pretrained.language_model()?;
    let config = model.config().clone();
    plan.validate(
        PlanStage::LmFinetune,
        LayerGroups::new(&config, HeadKind::Decoder).len(),
    )?;
    if let Some(&bad) = target
        .iter()
        .chain(heldout.unwrap_or(&[]))
        .find(|&&i| i >= config.vocab_size)
    {
        bail!(
            Config,
            "target id {} outside the checkpoint vocabulary of {}",
            bad,
            config.vocab_size
        );
    }
    let opts = LmTrainOptions {
        epochs: plan.epochs,
        schedule: Schedule::Slanted(plan.stlr),
        disc_factor: Some(plan.disc_factor),
        dropouts: Dropouts::scaled(plan.dropout_mult),
        clip: CLIP_NORM,
        adam: AdamConfig::default(),
        seed,
        unfreeze: plan.unfreeze_policy,
        frozen_initial: plan.frozen_groups_initial,
    };
    let log = train_lm(&mut model, target, heldout, &opts)?;
    let mut history = pretrained.log.clone();
    history.epochs.extend(log.epochs);
    history.steps = log.steps;
    Ok(Checkpoint::from_lm(
        &model,
        Stage::LmFinetuned,
        pretrained.vocab.clone(),
        history,
    ))
}

/// Fine-tunes on tweets; out-of-vocabulary tokens map to `<unk>`.
pub fn finetune_lm(
    pretrained: &Checkpoint,
    target: &[CleanTweet],
    heldout: Option<&[CleanTweet]>,
    plan: &FineTunePlan,
    seed: u64,
) -> Result<Checkpoint> {
    let stream = tweet_stream(target, &pretrained.vocab);
    let held: Option<Vec<usize>> = heldout.map(|h| tweet_stream(h, &pretrained.vocab));
    finetune_lm_stream(pretrained, &stream, held.as_deref(), plan, seed)
}
