//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ULMF" | u32 version | section meta | section vocab | section tensors | section log
//! section = u64 byte length | payload
//! ```
//!
//! `meta` and `log` are JSON, `vocab` is the non-special tokens joined by
//! `\n`, and `tensors` is `u32 count` followed by per tensor
//! `u32 name_len | name | u32 rank | u64 dims.. | f32 data..`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ulmfit_core::corpus::Vocabulary;
use ulmfit_core::lm::{Checkpoint, HeadSpec, LmConfig, Stage, TrainingLog, FORMAT_VERSION};
use ulmfit_core::numerics::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ULMF";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    stage: Stage,
    config: LmConfig,
    head: Option<HeadSpec>,
    vocab_min_freq: usize,
    vocab_max_size: Option<usize>,
}

fn put_section(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("checkpoint metadata is always serializable")
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ckpt.format_version.to_le_bytes());
    let meta = Meta {
        stage: ckpt.stage,
        config: ckpt.config.clone(),
        head: ckpt.head.clone(),
        vocab_min_freq: ckpt.vocab.min_freq(),
        vocab_max_size: ckpt.vocab.max_size(),
    };
    put_section(&mut out, &json(&meta));
    put_section(&mut out, ckpt.vocab.words().join("\n").as_bytes());

    let mut tensors = Vec::new();
    tensors.extend_from_slice(&(ckpt.tensors.len() as u32).to_le_bytes());
    for (name, t) in &ckpt.tensors {
        tensors.extend_from_slice(&(name.len() as u32).to_le_bytes());
        tensors.extend_from_slice(name.as_bytes());
        tensors.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            tensors.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            tensors.extend_from_slice(&v.to_le_bytes());
        }
    }
    put_section(&mut out, &tensors);
    put_section(&mut out, &json(&ckpt.log));
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format(format!(
                "truncated checkpoint while reading {}",
                self.what
            )));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn section(&mut self, what: &'static str) -> Result<&'a [u8]> {
        self.what = what;
        let len = self.u64()?;
        let len =
            usize::try_from(len).map_err(|_| Error::Format(format!("{what} section too large")))?;
        self.take(len)
    }
}

fn bad(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("corrupt {what} section: {e}"))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor {
        bytes,
        what: "header",
    };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format(
            "not a checkpoint file: bad magic bytes".into(),
        ));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}; this build reads version {FORMAT_VERSION}"
        )));
    }
    let meta: Meta = serde_json::from_slice(cur.section("meta")?).map_err(|e| bad("meta", e))?;

    let vocab_text = std::str::from_utf8(cur.section("vocab")?).map_err(|e| bad("vocab", e))?;
    let tokens: Vec<String> = if vocab_text.is_empty() {
        Vec::new()
    } else {
        vocab_text.split('\n').map(String::from).collect()
    };
    let vocab = Vocabulary::from_tokens(tokens, meta.vocab_min_freq, meta.vocab_max_size)
        .map_err(|e| bad("vocab", e))?;

    let mut tc = Cursor {
        bytes: cur.section("tensors")?,
        what: "tensors",
    };
    let count = tc.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = tc.u32()? as usize;
        let name = std::str::from_utf8(tc.take(name_len)?)
            .map_err(|e| bad("tensors", e))?
            .to_string();
        let rank = tc.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(tc.u64()?).map_err(|e| bad("tensors", e))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| bad("tensors", format!("tensor `{name}` too large")))?;
        let data: Vec<f32> = tc
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| bad("tensors", e))?;
        tensors.push((name, t));
    }
    if !tc.bytes.is_empty() {
        return Err(bad("tensors", "trailing bytes"));
    }

    let log: TrainingLog =
        serde_json::from_slice(cur.section("log")?).map_err(|e| bad("log", e))?;
    if !cur.bytes.is_empty() {
        return Err(Error::Format("trailing bytes after the log section".into()));
    }
    Ok(Checkpoint {
        format_version: version,
        stage: meta.stage,
        config: meta.config,
        head: meta.head,
        vocab,
        tensors,
        log,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
