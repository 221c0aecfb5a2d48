//! File formats, the bundled general corpus and the `ulmfit` command line
//! on top of [`ulmfit_core`].
//!
//! Stages and their artifacts:
//!
//! | subcommand    | reads                         | writes                                  |
//! |---------------|-------------------------------|-----------------------------------------|
//! | `stats`       | corpus CSV                    | n-gram, length and class-count CSVs     |
//! | `pretrain`    | general corpus                | `pretrained.ckpt`, epoch/step logs      |
//! | `finetune-lm` | `pretrained.ckpt`, corpus     | `lm_finetuned.ckpt`, logs               |
//! | `train-clf`   | `lm_finetuned.ckpt`, corpus   | `classifier.ckpt`, logs                 |
//! | `eval`        | `classifier.ckpt`, corpus     | metrics CSV/JSON, PR curve              |
//! | `ablate`      | `lm_finetuned.ckpt`, corpus   | ablation CSV/JSON, test split hash      |
//! | `predict`     | `classifier.ckpt`             | one probability line per input          |

pub mod cli;
pub mod codec;
pub mod config;
pub mod data;
pub mod error;
pub mod general;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
