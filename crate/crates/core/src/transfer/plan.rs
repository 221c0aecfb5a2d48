use serde::{Deserialize, Serialize};

use super::{StlrConfig, UnfreezePolicy};
use crate::error::{bail, Result};
use crate::lm::DROPOUT_MULT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStage {
    LmFinetune,
    Classifier,
}

/// Schedule, discriminative rates and unfreezing for one fine-tuning stage.
///
/// `stlr.total_steps` is filled in from the data when training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTunePlan {
    pub stage: PlanStage,
    pub stlr: StlrConfig,
    pub disc_factor: f64,
    pub epochs: usize,
    pub unfreeze_policy: UnfreezePolicy,
    pub frozen_groups_initial: usize,
    /// Sequences per step for the classifier; ignored for LM fine-tuning,
    /// which uses the model's own batch layout.
    pub batch_size: usize,
    pub dropout_mult: f64,
}

impl FineTunePlan {
    /// All groups trained from the start with discriminative rates.
    pub fn lm_finetune() -> FineTunePlan {
        FineTunePlan {
            stage: PlanStage::LmFinetune,
            stlr: StlrConfig::new(0.01, 0),
            disc_factor: 2.6,
            epochs: 2,
            unfreeze_policy: UnfreezePolicy::AllAtOnce,
            frozen_groups_initial: 0,
            batch_size: 32,
            dropout_mult: DROPOUT_MULT,
        }
    }

    /// Head only in the first epoch, one deeper group per later epoch.
    pub fn classifier(n_layers: usize) -> FineTunePlan {
        FineTunePlan {
            stage: PlanStage::Classifier,
            stlr: StlrConfig::new(0.01, 0),
            disc_factor: 2.6,
            epochs: 6,
            unfreeze_policy: UnfreezePolicy::Gradual,
            frozen_groups_initial: n_layers,
            batch_size: 8,
            dropout_mult: DROPOUT_MULT,
        }
    }

    pub fn validate(&self, stage: PlanStage, n_groups: usize) -> Result<()> {
        if self.stage != stage {
            bail!(Config, "plan is for {:?}, not {:?}", self.stage, stage);
        }
        StlrConfig {
            total_steps: 1,
            ..self.stlr
        }
        .validate()?;
        if !(self.disc_factor > 1.0) {
            bail!(
                Config,
                "disc_factor must exceed 1, got {}",
                self.disc_factor
            );
        }
        if self.frozen_groups_initial >= n_groups {
            bail!(
                Config,
                "cannot freeze {} of {} groups: the head must train",
                self.frozen_groups_initial,
                n_groups
            );
        }
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be positive");
        }
        if !(0.0..1.0 / 0.6).contains(&self.dropout_mult) {
            bail!(
                Config,
                "dropout_mult {} pushes a dropout probability outside [0, 1)",
                self.dropout_mult
            );
        }
        Ok(())
    }
}
