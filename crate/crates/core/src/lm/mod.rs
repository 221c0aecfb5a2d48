//! AWD-LSTM language model: configuration, the shared stacked-LSTM encoder,
//! truncated-BPTT training, perplexity and checkpoints.

mod batch;
mod checkpoint;
mod config;
mod encoder;
mod model;
mod train;

pub use batch::{batchify, tweet_stream, Block};
pub use checkpoint::{perplexity, Checkpoint, HeadSpec, Stage, FORMAT_VERSION};
pub use config::{Dropouts, LmConfig, Preset, DESK_PRETRAIN_DROPOUT_MULT, DROPOUT_MULT};
pub use encoder::{encode, param_names, Encoded, EncoderIds, EncoderMasks, LayerIds, LstmState};
pub use model::{lm_forward, AwdLstm};
pub use train::{train_lm, EpochRecord, LmTrainOptions, StepRecord, TrainingLog};

pub(crate) use encoder::check_ids;
pub(crate) use train::{group_lrs, resolve_schedule};
