use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::CleanTweet;
use crate::error::{bail, Result};

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SPECIALS: [&str; 4] = ["<unk>", "<pad>", "<bos>", "<eos>"];

/// Token/id mapping with the four special tokens at ids 0..4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, usize>,
    min_freq: usize,
    max_size: Option<usize>,
}

impl Vocabulary {
    /// Builds from a token stream. Ranking is (count desc, token asc);
    /// `max_size` bounds the number of non-special tokens.
    pub fn build<'a, I>(tokens: I, min_freq: usize, max_size: Option<usize>) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if min_freq < 1 {
            bail!(Config, "min_freq must be at least 1, got {}", min_freq);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq && !SPECIALS.contains(&t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(max) = max_size {
            ranked.truncate(max);
        }
        Self::from_tokens(
            ranked.into_iter().map(|(t, _)| t.to_string()).collect(),
            min_freq,
            max_size,
        )
    }

    /// Rebuilds a vocabulary from its non-special tokens in id order.
    pub fn from_tokens(
        tokens: Vec<String>,
        min_freq: usize,
        max_size: Option<usize>,
    ) -> Result<Vocabulary> {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut ids = BTreeMap::new();
        for (i, t) in all.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                bail!(Data, "duplicate vocabulary token `{}`", t);
            }
        }
        if let Some(max) = max_size {
            if all.len() > max + SPECIALS.len() {
                bail!(Data, "vocabulary of {} exceeds max_size {}", all.len(), max);
            }
        }
        Ok(Vocabulary {
            tokens: all,
            ids,
            min_freq,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn max_size(&self) -> Option<usize> {
        self.max_size
    }

    /// Non-special tokens in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[SPECIALS.len()..]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, `<unk>` when absent.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], add_bounds: bool) -> Vec<usize> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        if add_bounds {
            out.push(BOS);
        }
        out.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        if add_bounds {
            out.push(EOS);
        }
        out
    }

    pub fn numericalize(&self, tweet: &CleanTweet, add_bounds: bool) -> Vec<usize> {
        self.encode(&tweet.tokens, add_bounds)
    }

    /// Inverse of [`Vocabulary::numericalize`]; out-of-range ids map to `<unk>`.
    pub fn denumericalize(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIALS[UNK]).to_string())
            .collect()
    }
}

/// Vocabulary over a cleaned corpus.
pub fn build_vocab(
    corpus: &[CleanTweet],
    min_freq: usize,
    max_size: Option<usize>,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        bail!(Data, "cannot build a vocabulary from an empty corpus");
    }
    Vocabulary::build(
        corpus
            .iter()
            .flat_map(|t| t.tokens.iter().map(String::as_str)),
        min_freq,
        max_size,
    )
}
