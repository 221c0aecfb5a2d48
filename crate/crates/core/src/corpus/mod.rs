//! Tweet records, cleaning, vocabularies, deterministic splits and the
//! descriptive statistics (class counts, length histograms, n-grams).

mod clean;
mod split;
mod stats;
mod stopwords;
mod vocab;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use clean::{clean_text, tokenize, CleanProfile};
pub use split::{split, subsample_labels, DatasetSplit};
pub use stats::{class_counts, length_stats, ngram_stats, ClassCounts, LengthStats, NGramStats};
pub use stopwords::{is_stop_word, STOP_WORDS};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, PAD, SPECIALS, UNK};

use crate::error::{Error, Result};

/// Binary relevance label. `Related` is the positive class everywhere.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub enum Label {
    Related,
    Unrelated,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Related, Label::Unrelated];

    /// Output index in the classifier's two-way softmax.
    pub fn class_index(self) -> usize {
        match self {
            Label::Unrelated => 0,
            Label::Related => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Label {
        if i == 1 {
            Label::Related
        } else {
            Label::Unrelated
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Related => "Related",
            Label::Unrelated => "Unrelated",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Label> {
        if s.eq_ignore_ascii_case("related") {
            Ok(Label::Related)
        } else if s.eq_ignore_ascii_case("unrelated") {
            Ok(Label::Unrelated)
        } else {
            Err(Error::Label(alloc::format!("unknown label `{}`", s)))
        }
    }
}

/// A tweet as ingested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl RawTweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        RawTweet {
            id: id.into(),
            text: text.into(),
            label,
        }
    }

    pub fn is_empty_text(&self) -> bool {
        self.text.trim().is_empty()
    }

    pub fn clean(&self, profile: CleanProfile) -> CleanTweet {
        CleanTweet {
            id: self.id.clone(),
            tokens: tokenize(&clean_text(&self.text, profile)),
            label: self.label,
        }
    }
}

/// A normalized tweet: lowercase word tokens only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanTweet {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Option<Label>,
}

impl CleanTweet {
    pub fn new(id: impl Into<String>, tokens: &[&str], label: Option<Label>) -> Self {
        CleanTweet {
            id: id.into(),
            tokens: tokens.iter().map(|t| String::from(*t)).collect(),
            label,
        }
    }
}

/// Cleans a batch of raw tweets with one profile.
pub fn clean_all(raw: &[RawTweet], profile: CleanProfile) -> Vec<CleanTweet> {
    raw.iter().map(|t| t.clean(profile)).collect()
}

/// Requires every record to carry a label.
pub fn require_labels(data: &[CleanTweet]) -> Result<()> {
    match data.iter().find(|t| t.label.is_none()) {
        Some(t) => Err(Error::Label(alloc::format!(
            "record `{}` has no label",
            t.id
        ))),
        None => Ok(()),
    }
}
