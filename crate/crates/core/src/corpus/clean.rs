use alloc::string::String;
use alloc::vec::Vec;

use super::stopwords::is_stop_word;

/// Cleaning profile. `Stats` additionally drops stop words; `Model` keeps
/// them because the language model needs function words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleanProfile {
    Stats,
    Model,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_lowercase() || c == '\''
}

/// Byte offset where a URL starts inside a whitespace-delimited chunk: an
/// `http` or `www` run at the chunk start or right after a non-letter.
fn url_start(chunk: &str) -> Option<usize> {
    let bytes = chunk.as_bytes();
    chunk.char_indices().map(|(i, _)| i).find(|&i| {
        (chunk[i..].starts_with("http") || chunk[i..].starts_with("www"))
            && (i == 0 || !bytes[i - 1].is_ascii_alphabetic())
    })
}

fn is_url_token(token: &str) -> bool {
    token.starts_with("http") || token.starts_with("www")
}

/// Replaces `@mentions` (the `@` plus the following identifier characters)
/// with a space.
fn drop_mentions(chunk: &str) -> String {
    let mut out = String::with_capacity(chunk.len());
    let mut in_mention = false;
    for c in chunk.chars() {
        if c == '@' {
            in_mention = true;
            out.push(' ');
        } else if in_mention && (c.is_ascii_alphanumeric() || c == '_') {
            continue;
        } else {
            in_mention = false;
            out.push(c);
        }
    }
    out
}

fn push_words(chunk: &str, profile: CleanProfile, out: &mut Vec<String>) {
    for piece in chunk.split(|c: char| !is_word_char(c)) {
        let word = piece.trim_matches('\'');
        if word.is_empty() || is_url_token(word) {
            continue;
        }
        if word.len() == 1 && word != "a" && word != "i" {
            continue;
        }
        if profile == CleanProfile::Stats && is_stop_word(word) {
            continue;
        }
        out.push(String::from(word));
    }
}

/// Normalizes tweet text.
///
/// Lowercases; removes URLs, `@mentions`, digits, punctuation and other
/// symbols; keeps the word of a `#hashtag`; drops single letters other than
/// `a` and `i`; collapses whitespace. The `Stats` profile also removes stop
/// words. Every output token matches `[a-z][a-z']*`. The function is
/// idempotent.
pub fn clean_text(text: &str, profile: CleanProfile) -> String {
    let lower = text.to_lowercase();
    let mut words = Vec::new();
    for chunk in lower.split_whitespace() {
        let chunk = match url_start(chunk) {
            Some(i) => &chunk[..i],
            None => chunk,
        };
        let chunk = drop_mentions(chunk);
        push_words(&chunk, profile, &mut words);
    }
    words.join(" ")
}

/// Splits cleaned text on single spaces.
pub fn tokenize(clean: &str) -> Vec<String> {
    clean
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}
