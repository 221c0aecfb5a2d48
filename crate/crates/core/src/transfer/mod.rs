//! Fine-tuning: slanted triangular learning rates, discriminative per-group
//! rates, gradual unfreezing, and the concat-pooling classifier.

mod classifier;
mod finetune;
mod groups;
mod lr_find;
mod plan;
mod schedule;

pub use classifier::{
    build_classifier, pad_left, predict, train_classifier, ClassifierModel, Prediction, CLASSES,
    HEAD_HIDDEN,
};
pub use finetune::{finetune_lm, finetune_lm_stream};
pub use groups::{HeadKind, LayerGroups, UnfreezePolicy};
pub use lr_find::{classifier_lr_range_test, lr_grid, lr_range_test, ClassifierProbe, LrProbe};
pub use plan::{FineTunePlan, PlanStage};
pub use schedule::{discriminative_lrs, stlr, Schedule, StlrConfig};
