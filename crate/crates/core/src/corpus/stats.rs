use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{clean_text, tokenize, CleanProfile, CleanTweet, Label, RawTweet};
use crate::error::{bail, Result};

/// Sliding-window n-gram counts within tweets.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramStats {
    pub n: usize,
    pub counts: BTreeMap<Vec<String>, usize>,
    pub top_k: usize,
    /// The `top_k` most frequent n-grams, count descending, ties
    /// lexicographic.
    pub top: Vec<(Vec<String>, usize)>,
}

pub fn ngram_stats(corpus: &[CleanTweet], n: usize, top_k: usize) -> Result<NGramStats> {
    if !(1..=3).contains(&n) {
        bail!(Config, "n-gram order must be 1, 2 or 3, got {}", n);
    }
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for tweet in corpus {
        for window in tweet.tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    let mut top: Vec<(Vec<String>, usize)> = counts.iter().map(|(k, &c)| (k.clone(), c)).collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(top_k);
    Ok(NGramStats {
        n,
        counts,
        top_k,
        top,
    })
}

/// Histograms with bin width 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthStats {
    /// Words per tweet, counted on `Model`-profile tokens.
    pub words: BTreeMap<usize, usize>,
    /// Characters per tweet on the raw text.
    pub chars: BTreeMap<usize, usize>,
}

pub fn length_stats(corpus: &[RawTweet]) -> LengthStats {
    let mut stats = LengthStats::default();
    for t in corpus {
        let words = tokenize(&clean_text(&t.text, CleanProfile::Model)).len();
        *stats.words.entry(words).or_insert(0) += 1;
        *stats.chars.entry(t.text.chars().count()).or_insert(0) += 1;
    }
    stats
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub related: usize,
    pub unrelated: usize,
    pub unlabeled: usize,
}

pub fn class_counts(corpus: &[RawTweet]) -> ClassCounts {
    let mut c = ClassCounts::default();
    for t in corpus {
        match t.label {
            Some(Label::Related) => c.related += 1,
            Some(Label::Unrelated) => c.unrelated += 1,
            None => c.unlabeled += 1,
        }
    }
    c
}
