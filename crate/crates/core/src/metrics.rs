//! Caption metrics: corpus BLEU-2/4, ROUGE-1/2/L F1 and an exact-match
//! METEOR. Scores are fractions in `[0, 1]`.
//!
//! Text is lowercased and split on whitespace, with every ASCII punctuation
//! character as its own token. METEOR uses exact matches only (no stemming
//! or synonyms), so absolute values differ from toolkits that use them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract_err, Result};

pub const BLEU_EPSILON: f64 = 1e-9;
pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: u32 = 3;
pub const METEOR_GAMMA: f64 = 0.5;

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() || c.is_ascii_punctuation() {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
            if c.is_ascii_punctuation() {
                out.push(String::from(c));
            }
        } else {
            word.push(c);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// `(Σ min(cand, ref), candidate n-gram total, reference n-gram total)`.
fn clipped_overlap<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let overlap = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    (overlap, candidate.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

/// Corpus BLEU with uniform weights over `1..=n_max`, one reference per
/// candidate. Zero clipped counts are replaced by [`BLEU_EPSILON`].
pub fn bleu<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>], n_max: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(contract_err!("BLEU over an empty corpus"));
    }
    if candidates.len() != references.len() {
        return Err(contract_err!("{} candidates for {} references", candidates.len(), references.len()));
    }
    if n_max == 0 {
        return Err(contract_err!("BLEU order must be at least 1"));
    }
    let mut matched = vec![0usize; n_max];
    let mut totals = vec![0usize; n_max];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        c_len += c.len();
        r_len += r.len();
        for n in 1..=n_max {
            let (m, t, _) = clipped_overlap(c, r, n);
            matched[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if c_len == 0 {
        return Ok(0.0);
    }
    let log_mean = matched
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| {
            let num = if m == 0 { BLEU_EPSILON } else { m as f64 };
            libm::log(num / t.max(1) as f64)
        })
        .sum::<f64>()
        / n_max as f64;
    let bp = if c_len < r_len { libm::exp(1.0 - r_len as f64 / c_len as f64) } else { 1.0 };
    Ok(bp * libm::exp(log_mean))
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// ROUGE-N F1 for one pair.
pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> Result<f64> {
    if reference.is_empty() {
        return Err(contract_err!("ROUGE against an empty reference"));
    }
    if n == 0 {
        return Err(contract_err!("ROUGE order must be at least 1"));
    }
    let (overlap, c_total, r_total) = clipped_overlap(candidate, reference, n);
    if overlap == 0 {
        return Ok(0.0);
    }
    Ok(f1(overlap as f64 / c_total as f64, overlap as f64 / r_total as f64))
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 for one pair.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(contract_err!("ROUGE-L against an empty reference"));
    }
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return Ok(0.0);
    }
    Ok(f1(l as f64 / candidate.len() as f64, l as f64 / reference.len() as f64))
}

/// Exact-match alignment: each candidate token, left to right, takes the
/// leftmost unused equal reference token. Returns `(cand, ref)` pairs.
pub fn align<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (i, c) in candidate.iter().enumerate() {
        if let Some(j) = (0..reference.len()).find(|&j| !used[j] && reference[j].as_ref() == c.as_ref()) {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// METEOR with exact matching only.
pub fn meteor<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(contract_err!("METEOR against an empty reference"));
    }
    let pairs = align(candidate, reference);
    let m = pairs.len();
    if m == 0 {
        return Ok(0.0);
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let chunks = 1 + pairs.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
    let frag = (chunks as u64).pow(METEOR_BETA) as f64 / (m as u64).pow(METEOR_BETA) as f64;
    let penalty = METEOR_GAMMA * frag;
    Ok(f_mean * (1.0 - penalty))
}

/// The six corpus scores, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricScores {
    pub bleu2: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

impl MetricScores {
    pub const NAMES: [&'static str; 6] = ["BLEU-2", "BLEU-4", "METEOR", "ROUGE-1", "ROUGE-2", "ROUGE-L"];

    pub fn values(&self) -> [f64; 6] {
        [self.bleu2, self.bleu4, self.meteor, self.rouge1, self.rouge2, self.rouge_l]
    }

    /// Percentages rounded to one decimal.
    pub fn percentages(&self) -> [f64; 6] {
        self.values().map(|v| libm::round(v * 1000.0) / 10.0)
    }
}

/// Corpus BLEU plus per-pair METEOR and ROUGE averaged over the corpus.
pub fn score_corpus<S: AsRef<str>>(candidates: &[S], references: &[S]) -> Result<MetricScores> {
    if candidates.len() != references.len() {
        return Err(contract_err!("{} candidates for {} references", candidates.len(), references.len()));
    }
    if candidates.is_empty() {
        return Err(contract_err!("scoring an empty corpus"));
    }
    let cands: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c.as_ref())).collect();
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();
    let n = cands.len() as f64;
    let mut s = MetricScores { bleu2: bleu(&cands, &refs, 2)?, bleu4: bleu(&cands, &refs, 4)?, ..Default::default() };
    for (c, r) in cands.iter().zip(&refs) {
        s.meteor += meteor(c, r)?;
        s.rouge1 += rouge_n(c, r, 1)?;
        s.rouge2 += rouge_n(c, r, 2)?;
        s.rouge_l += rouge_l(c, r)?;
    }
    s.meteor /= n;
    s.rouge1 /= n;
    s.rouge2 /= n;
    s.rouge_l /= n;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(t("The molecule is a Lactam, (S)-form."), [
            "the", "molecule", "is", "a", "lactam", ",", "(", "s", ")", "-", "form", "."
        ]);
        assert!(t("   ").is_empty());
    }

    #[test]
    fn bleu_cases() {
        let a = [t("the cat sat on the mat")];
        assert_eq!(bleu(&a, &a, 4).unwrap(), 1.0);
        let zero = bleu(&[t("x y z w")], &[t("a b c d")], 2).unwrap();
        assert!(zero > 0.0 && zero < 1e-8);
        // Clipped unigram precision 1/3; bigram "the the" never matches.
        let b1 = bleu(&[t("the the the")], &[t("the cat")], 1).unwrap();
        assert!((b1 - 1.0 / 3.0).abs() < 1e-15);
        // Brevity penalty: c = 2, r = 4.
        let bp = bleu(&[t("a b")], &[t("a b c d")], 1).unwrap();
        assert!((bp - libm::exp(1.0 - 2.0)).abs() < 1e-15);
        assert!(bleu::<String>(&[], &[], 2).is_err());
    }

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge_n(&t("a b c"), &t("a b c"), 2).unwrap(), 1.0);
        assert_eq!(rouge_n(&t("x y"), &t("a b"), 1).unwrap(), 0.0);
        assert!((rouge_n(&t("a b c"), &t("a b d"), 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge_n(&t("a"), &t("a b"), 2).unwrap(), 0.0);
        assert!(rouge_n(&t("a"), &[] as &[String], 1).is_err());
        assert!((rouge_l(&t("a c d"), &t("a b c d")).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(lcs_len(&t("a b"), &t("b a")), 1);
        assert_eq!(rouge_l(&t("a b c"), &t("a b c")).unwrap(), 1.0);
    }

    #[test]
    fn meteor_cases() {
        let s = t("the molecule is an acid");
        let m = 5.0f64;
        assert_eq!(meteor(&s, &s).unwrap(), 1.0 - METEOR_GAMMA * libm::pow(1.0 / m, 3.0));
        assert_eq!(meteor(&t("b a"), &t("a b")).unwrap(), 0.5);
        assert_eq!(meteor(&t("x"), &t("a b")).unwrap(), 0.0);
        assert_eq!(align(&t("a a b"), &t("b a")), [(0, 1), (2, 0)]);
    }

    #[test]
    fn corpus_scores_and_rounding() {
        let refs = ["The molecule is a lactam.", "It is an acid with two rings."];
        let s = score_corpus(&refs, &refs).unwrap();
        assert_eq!(s.bleu2, 1.0);
        assert_eq!(s.rouge_l, 1.0);
        assert_eq!(s.percentages()[0], 100.0);
        let r = MetricScores { bleu2: 0.63849, ..Default::default() };
        assert_eq!(r.percentages()[0], 63.8);
    }
}
