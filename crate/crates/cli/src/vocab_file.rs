//! Vocabulary files: one token per line, in id order, with `\\`, `\n`,
//! `\r` and `\t` escaped.

use std::path::Path;

use molcap_core::text::Vocabulary;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub fn escape(token: &str) -> String {
    let mut s = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            '\t' => s.push_str("\\t"),
            c => s.push(c),
        }
    }
    s
}

pub fn unescape(line: &str) -> Result<String, String> {
    let mut s = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            s.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => s.push('\\'),
            Some('n') => s.push('\n'),
            Some('r') => s.push('\r'),
            Some('t') => s.push('\t'),
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("line ends in a lone backslash".into()),
        }
    }
    Ok(s)
}

pub fn vocab_to_string(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for t in vocab.tokens() {
        out.push_str(&escape(t));
        out.push('\n');
    }
    out
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    std::fs::write(path, vocab_to_string(vocab)).map_err(|e| CliError::io(path, e))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let tokens = text
        .lines()
        .enumerate()
        .map(|(i, line)| unescape(line).map_err(|m| CliError::format(path, i + 1, m)))
        .collect::<Result<Vec<_>>>()?;
    Vocabulary::from_tokens(tokens).map_err(|e| CliError::format(path, 0, e.to_string()))
}

/// SHA-256 over the length-prefixed tokens in id order.
pub fn fingerprint(vocab: &Vocabulary) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in vocab.tokens() {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    h.finalize().into()
}
