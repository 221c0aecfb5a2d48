use alloc::vec::Vec;

use crate::corpus::{CleanTweet, Vocabulary};
use crate::error::{bail, Result};

/// One truncated-BPTT block. Ids are stored batch-major: lane `b`, step `t`
/// lives at `b * len + t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub batch: usize,
    pub len: usize,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
}

impl Block {
    /// Input ids of step `t` across the batch.
    pub fn step_inputs(&self, t: usize) -> Vec<usize> {
        (0..self.batch)
            .map(|b| self.inputs[b * self.len + t])
            .collect()
    }

    /// Targets reordered step-major (`t * batch + b`), matching the row
    /// order of the decoder output.
    pub fn targets_step_major(&self) -> Vec<usize> {
        (0..self.len)
            .flat_map(|t| (0..self.batch).map(move |b| (b, t)))
            .map(|(b, t)| self.targets[b * self.len + t])
            .collect()
    }
}

/// Continuous-stream layout: the stream is cut into `batch` contiguous lanes
/// of `N / batch` tokens; each block takes the next `bptt` steps of every
/// lane, targets shifted by one. Tokens that cannot fill a block are
/// dropped.
pub fn batchify(stream: &[usize], batch: usize, bptt: usize) -> Result<Vec<Block>> {
    if batch == 0 || bptt == 0 {
        bail!(Config, "batch and bptt must be positive");
    }
    if stream.len() < batch * (bptt + 1) {
        bail!(
            Data,
            "stream of {} tokens is shorter than batch * (bptt + 1) = {}",
            stream.len(),
            batch * (bptt + 1)
        );
    }
    let lane = stream.len() / batch;
    let blocks = (lane - 1) / bptt;
    Ok((0..blocks)
        .map(|i| {
            let mut inputs = Vec::with_capacity(batch * bptt);
            let mut targets = Vec::with_capacity(batch * bptt);
            for b in 0..batch {
                let start = b * lane + i * bptt;
                inputs.extend_from_slice(&stream[start..start + bptt]);
                targets.extend_from_slice(&stream[start + 1..start + bptt + 1]);
            }
            Block {
                batch,
                len: bptt,
                inputs,
                targets,
            }
        })
        .collect())
}

/// Concatenates tweets into one token stream, each wrapped in
/// `<bos> ... <eos>`.
pub fn tweet_stream(tweets: &[CleanTweet], vocab: &Vocabulary) -> Vec<usize> {
    tweets
        .iter()
        .flat_map(|t| vocab.numericalize(t, true))
        .collect()
}
