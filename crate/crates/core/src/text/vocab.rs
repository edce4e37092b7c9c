//! Character-level byte-pair vocabulary.
//!
//! Training splits every corpus string into chunks that start at each
//! whitespace character, so merges never cross a word boundary, then merges
//! the most frequent adjacent symbol pair until the vocabulary is full.
//! Frequency ties go to the lexicographically smallest `(left, right)` pair.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
pub const RESERVED: [&str; 3] = ["<pad>", "</s>", "<unk>"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
    longest: usize,
}

/// Fixed-length token ids with a padding mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// `false` exactly where `ids` holds [`PAD_ID`].
    pub mask: Vec<bool>,
    pub raw_text: Option<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-pad positions.
    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn chunks(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() && i > start {
            out.push(&s[start..i]);
            start = i;
        }
    }
    if start < s.len() {
        out.push(&s[start..]);
    }
    out
}

impl Vocabulary {
    /// Trains a vocabulary of at most `target_size` entries (the three
    /// reserved ids included). Stops early when no pair is left to merge.
    pub fn build<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Config("cannot build a vocabulary from an empty corpus".to_string()));
        }
        let mut words: BTreeMap<&str, usize> = BTreeMap::new();
        let mut chars: BTreeSet<char> = BTreeSet::new();
        for s in corpus {
            for w in chunks(s.as_ref()) {
                *words.entry(w).or_default() += 1;
                chars.extend(w.chars());
            }
        }
        let base = RESERVED.len() + chars.len();
        if target_size < base {
            return Err(Error::Config(alloc::format!(
                "vocabulary size {} is below the {} reserved and base-character entries",
                target_size,
                base
            )));
        }
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(chars.iter().map(|c| c.to_string()));
        let mut known: BTreeSet<String> = tokens.iter().cloned().collect();

        let mut segmented: Vec<(Vec<String>, usize)> =
            words.into_iter().map(|(w, n)| (w.chars().map(|c| c.to_string()).collect(), n)).collect();

        while tokens.len() < target_size {
            let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for (syms, n) in &segmented {
                for w in syms.windows(2) {
                    *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += n;
                }
            }
            // BTreeMap iterates in lexicographic key order, so the first
            // maximum is the tie-break winner.
            let mut best: Option<((&str, &str), usize)> = None;
            for (pair, n) in pairs {
                let merged_is_reserved = RESERVED.iter().any(|r| r.len() == pair.0.len() + pair.1.len()
                    && r.starts_with(pair.0)
                    && r.ends_with(pair.1));
                if merged_is_reserved {
                    continue;
                }
                if best.is_none_or(|(_, b)| n > b) {
                    best = Some((pair, n));
                }
            }
            let Some(((left, right), _)) = best else { break };
            let (left, right) = (left.to_string(), right.to_string());
            let merged = alloc::format!("{left}{right}");
            for (syms, _) in segmented.iter_mut() {
                let mut out = Vec::with_capacity(syms.len());
                let mut i = 0;
                while i < syms.len() {
                    if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
                        out.push(merged.clone());
                        i += 2;
                    } else {
                        out.push(core::mem::take(&mut syms[i]));
                        i += 1;
                    }
                }
                *syms = out;
            }
            if known.insert(merged.clone()) {
                tokens.push(merged);
            }
        }
        Self::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Config("vocabulary must start with <pad>, </s>, <unk>".to_string()));
        }
        let mut ids = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Config(alloc::format!("empty token at id {i}")));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Config(alloc::format!("token {t:?} appears twice")));
            }
        }
        let longest = tokens[RESERVED.len()..].iter().map(|t| t.chars().count()).max().unwrap_or(1);
        Ok(Self { tokens, ids, longest })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Greedy longest-match segmentation. Characters outside the vocabulary
    /// map to [`UNK_ID`]; reserved tokens are never matched from text.
    pub fn encode(&self, s: &str) -> Vec<u32> {
        let bounds: Vec<usize> = s.char_indices().map(|(i, _)| i).chain([s.len()]).collect();
        let mut out = Vec::new();
        let mut i = 0;
        let nchars = bounds.len() - 1;
        while i < nchars {
            let max = self.longest.min(nchars - i);
            let hit = (1..=max).rev().find_map(|len| {
                self.ids.get(&s[bounds[i]..bounds[i + len]]).filter(|&&id| id > UNK_ID).map(|&id| (id, len))
            });
            match hit {
                Some((id, len)) => {
                    out.push(id);
                    i += len;
                }
                None => {
                    out.push(UNK_ID);
                    i += 1;
                }
            }
        }
        out
    }

    /// Encodes into exactly `budget` ids. With `eos`, the text is cut to
    /// `budget - 1` tokens and an end-of-sequence id follows it.
    pub fn encode_text(&self, s: &str, budget: usize, eos: bool) -> Result<TokenSequence> {
        if budget == 0 {
            return Err(Error::Config("token budget must be at least 1".to_string()));
        }
        let mut ids = self.encode(s);
        if eos {
            ids.truncate(budget - 1);
            ids.push(EOS_ID);
        } else {
            ids.truncate(budget);
        }
        let valid = ids.len();
        ids.resize(budget, PAD_ID);
        let mut mask = vec![false; budget];
        mask[..valid].iter_mut().for_each(|m| *m = true);
        Ok(TokenSequence { ids, mask, raw_text: Some(s.to_string()) })
    }

    /// Concatenates token strings, stopping at the first end-of-sequence and
    /// skipping padding. Unknown ids render as U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut s = String::new();
        for &id in ids {
            match id {
                EOS_ID => break,
                PAD_ID => {}
                UNK_ID => s.push('\u{FFFD}'),
                _ => s.push_str(self.token(id).unwrap_or("\u{FFFD}")),
            }
        }
        s
    }
}
