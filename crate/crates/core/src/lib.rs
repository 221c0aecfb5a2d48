//! Transfer-learning core for short-text classification.
//!
//! Everything in this crate is allocation-only (`alloc`) and free of IO, so it
//! builds under `no_std`. File formats, CSV ingestion and the command line
//! live in the `ulmfit` companion crate.
//!
//! Pipeline, bottom-up:
//!
//! * [`corpus`]: tweet cleaning, tokenization, vocabularies, splits, n-gram
//!   statistics.
//! * [`numerics`]: a small reverse-mode tape with exactly the operators an
//!   AWD-LSTM needs, plus dropout masks, Adam and a finite-difference checker.
//! * [`lm`]: the stacked LSTM language model, truncated-BPTT training and
//!   perplexity.
//! * [`transfer`]: slanted triangular learning rates, discriminative rates,
//!   gradual unfreezing, the concat-pooling classifier.
//! * [`eval`]: confusion matrices, per-class metrics, PR curves.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod lm;
pub mod numerics;
pub mod synthetic;
pub mod transfer;

pub use error::{Error, Result};
