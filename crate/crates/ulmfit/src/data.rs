//! Tweet CSV ingestion and the descriptive-statistics CSVs.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ulmfit_core::corpus::{ClassCounts, Label, LengthStats, NGramStats, RawTweet};

use crate::error::{Error, Result};

pub const HEADER: [&str; 3] = ["tweet_id", "text", "label"];

/// Reads a `tweet_id,text,label` CSV file.
pub fn load_tweets(path: impl AsRef<Path>) -> Result<Vec<RawTweet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tweets(file)
}

/// Parses tweets from any reader. Labels are case-insensitive; an empty
/// label cell means unlabeled.
pub fn read_tweets<R: Read>(reader: R) -> Result<Vec<RawTweet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.byte_records();
    let header = match records.next() {
        None => {
            return Err(Error::Format(
                "empty file: expected header `tweet_id,text,label`".into(),
            ))
        }
        Some(r) => r.map_err(csv_error)?,
    };
    let fields: Vec<&[u8]> = header.iter().collect();
    let bom_stripped = fields
        .first()
        .map(|f| f.strip_prefix(b"\xEF\xBB\xBF".as_slice()).unwrap_or(f));
    let matches = fields.len() == HEADER.len()
        && bom_stripped == Some(HEADER[0].as_bytes())
        && fields[1..]
            .iter()
            .zip(&HEADER[1..])
            .all(|(f, h)| *f == h.as_bytes());
    if !matches {
        return Err(Error::Format(format!(
            "bad header `{}`: expected `tweet_id,text,label`",
            String::from_utf8_lossy(&header.as_slice().to_vec())
        )));
    }

    let mut tweets = Vec::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(Error::Row {
                line,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let cell = |i: usize| -> Result<&str> {
            std::str::from_utf8(&record[i]).map_err(|_| Error::Row {
                line,
                message: "invalid UTF-8".into(),
            })
        };
        let label = match cell(2)?.trim() {
            "" => None,
            s => Some(s.parse::<Label>().map_err(|_| {
                Error::Core(ulmfit_core::Error::Label(format!(
                    "line {}: unknown label `{}`",
                    line, s
                )))
            })?),
        };
        tweets.push(RawTweet::new(cell(0)?, cell(1)?, label));
    }
    Ok(tweets)
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Row {
            line: p.line(),
            message: e.to_string(),
        },
        None => Error::Format(e.to_string()),
    }
}

/// Writes tweets in the input format.
pub fn write_tweets<W: Write>(writer: W, tweets: &[RawTweet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER).map_err(csv_write)?;
    for t in tweets {
        let label = t.label.map_or("", Label::as_str);
        w.write_record([t.id.as_str(), t.text.as_str(), label])
            .map_err(csv_write)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

fn csv_write(e: csv::Error) -> Error {
    Error::Format(format!("csv write failed: {e}"))
}

/// `ngram,count` rows for the top n-grams, tokens space-joined.
pub fn write_ngrams<W: Write>(writer: W, stats: &NGramStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ngram", "count"]).map_err(csv_write)?;
    for (gram, count) in &stats.top {
        w.write_record([gram.join(" "), count.to_string()])
            .map_err(csv_write)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// `bin,count` rows of a histogram.
pub fn write_histogram<'a, W, I>(writer: W, bins: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a usize, &'a usize)>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin", "count"]).map_err(csv_write)?;
    for (bin, count) in bins {
        w.write_record([bin.to_string(), count.to_string()])
            .map_err(csv_write)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_lengths<W: Write>(words: W, chars: W, stats: &LengthStats) -> Result<()> {
    write_histogram(words, &stats.words)?;
    write_histogram(chars, &stats.chars)
}

/// `class,count` table, unlabeled rows only when present.
pub fn write_class_counts<W: Write>(writer: W, counts: &ClassCounts) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["class", "count"]).map_err(csv_write)?;
    w.write_record(["Related", &counts.related.to_string()])
        .map_err(csv_write)?;
    w.write_record(["Unrelated", &counts.unrelated.to_string()])
        .map_err(csv_write)?;
    if counts.unlabeled > 0 {
        w.write_record(["unlabeled", &counts.unlabeled.to_string()])
            .map_err(csv_write)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
