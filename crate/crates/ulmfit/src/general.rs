//! The bundled general-domain corpus used for language-model pretraining.
//!
//! The file is generated by [`ulmfit_core::synthetic::general_corpus`] and
//! checked in so pretraining needs no network or generator run. A test
//! keeps it in sync with the generator.

use std::path::Path;

use crate::error::{Error, Result};

pub const BUNDLED: &str = include_str!("../data/general.txt");

/// Token budget and generator seed the bundled file was made with.
pub const BUNDLED_TOKENS: usize = 100_000;
pub const BUNDLED_SEED: u64 = 0;

/// Regenerates the bundled text.
pub fn generate() -> String {
    let mut text = ulmfit_core::synthetic::general_corpus(BUNDLED_TOKENS, BUNDLED_SEED).join("\n");
    text.push('\n');
    text
}

pub fn bundled_lines() -> Vec<String> {
    lines(BUNDLED)
}

/// Non-blank lines of a text file.
pub fn load_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(lines(&text))
}

fn lines(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_matches_generator() {
        assert!(generate() == BUNDLED, "data/general.txt is stale; regenerate it with `cargo run -p ulmfit --example gen_general`");
    }
}
