//! Autoregressive decoding over any next-token scorer.

use alloc::vec::Vec;

use super::transformer::TextModel;
use super::vocab::{Vocabulary, EOS_ID, PAD_ID};
use crate::error::{contract_err, Result};
use crate::fusion::FusedDecoderInput;
use crate::numerics::{Dropout, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Greedy,
    Beam(usize),
}

/// Log-probabilities of the next token given the tokens emitted so far.
pub trait NextTokenScorer {
    fn next_log_probs(&mut self, prefix: &[u32]) -> Result<Vec<f64>>;
}

/// Row-wise `log_softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&x| libm::exp(x - max)).sum::<f64>());
    logits.iter().map(|&x| x - lse).collect()
}

/// Index of the largest entry, lowest index on ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Token ids emitted before end-of-sequence, at most `max_len` of them.
pub fn generate_ids(scorer: &mut dyn NextTokenScorer, strategy: Strategy, max_len: usize) -> Result<Vec<u32>> {
    if max_len == 0 {
        return Err(contract_err!("max_len must be at least 1"));
    }
    match strategy {
        Strategy::Greedy => greedy(scorer, max_len),
        Strategy::Beam(0) => Err(contract_err!("beam width must be at least 1")),
        Strategy::Beam(width) => beam(scorer, width, max_len),
    }
}

pub fn generate(
    scorer: &mut dyn NextTokenScorer,
    vocab: &Vocabulary,
    strategy: Strategy,
    max_len: usize,
) -> Result<alloc::string::String> {
    Ok(vocab.decode(&generate_ids(scorer, strategy, max_len)?))
}

fn greedy(scorer: &mut dyn NextTokenScorer, max_len: usize) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    while out.len() < max_len {
        let next = argmax(&scorer.next_log_probs(&out)?) as u32;
        if next == EOS_ID {
            break;
        }
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<u32>,
    log_prob: f64,
    finished: bool,
}

impl Hypothesis {
    /// Log-probability per emitted token, end-of-sequence included.
    fn normalized(&self) -> f64 {
        let len = self.tokens.len() + usize::from(self.finished);
        self.log_prob / len.max(1) as f64
    }
}

/// Keeps the `width` highest-scoring extensions each step. A hypothesis
/// that emits end-of-sequence leaves the beam; the winner is the finished
/// or length-capped hypothesis with the best length-normalized score.
fn beam(scorer: &mut dyn NextTokenScorer, width: usize, max_len: usize) -> Result<Vec<u32>> {
    let mut live = alloc::vec![Hypothesis { tokens: Vec::new(), log_prob: 0.0, finished: false }];
    let mut done: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for h in &live {
            let lp = scorer.next_log_probs(&h.tokens)?;
            for (tok, &p) in lp.iter().enumerate() {
                let mut tokens = h.tokens.clone();
                let finished = tok as u32 == EOS_ID;
                if !finished {
                    tokens.push(tok as u32);
                }
                candidates.push(Hypothesis { tokens, log_prob: h.log_prob + p, finished });
            }
        }
        // Stable sort keeps earlier hypotheses and lower token ids first on ties.
        candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        candidates.truncate(width);
        live.clear();
        for c in candidates {
            if c.finished {
                done.push(c);
            } else {
                live.push(c);
            }
        }
        if live.is_empty() {
            break;
        }
    }
    done.extend(live);
    let mut best = 0;
    for (i, h) in done.iter().enumerate() {
        if h.normalized() > done[best].normalized() {
            best = i;
        }
    }
    Ok(done.swap_remove(best).tokens)
}

/// Scores next tokens with a [`TextModel`] decoder over a fixed context.
///
/// The context is prepared once; each call re-runs the decoder on a
/// no-grad tape and rolls the tape back afterwards.
pub struct ModelScorer<'a> {
    model: &'a TextModel,
    store: &'a ParamStore,
    tape: &'a mut Tape,
    context: Var,
    mark: usize,
}

impl<'a> ModelScorer<'a> {
    pub fn new(
        model: &'a TextModel,
        store: &'a ParamStore,
        tape: &'a mut Tape,
        context: &FusedDecoderInput,
    ) -> Result<Self> {
        let context_var = model.prepare_context(tape, store, context)?;
        for id in model.param_ids() {
            tape.param(store, id);
        }
        let mark = tape.len();
        Ok(Self { model, store, tape, context: context_var, mark })
    }
}

impl NextTokenScorer for ModelScorer<'_> {
    fn next_log_probs(&mut self, prefix: &[u32]) -> Result<Vec<f64>> {
        let budget = self.model.config.decoder_len;
        let start = prefix.len().saturating_sub(budget - 1);
        let mut inputs = Vec::with_capacity(prefix.len() + 1);
        inputs.push(PAD_ID);
        inputs.extend_from_slice(&prefix[start..]);
        let out =
            self.model.decode_inputs(self.tape, self.store, self.context, &inputs, &mut Dropout::off());
        let result = out.map(|o| log_softmax(self.tape.value(o.logits).row(inputs.len() - 1)));
        self.tape.truncate(self.mark);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Returns row `prefix.len()` of a fixed table, or the last row.
    struct Table(Vec<Vec<f64>>);

    impl NextTokenScorer for Table {
        fn next_log_probs(&mut self, prefix: &[u32]) -> Result<Vec<f64>> {
            let row = &self.0[prefix.len().min(self.0.len() - 1)];
            Ok(log_softmax(row))
        }
    }

    fn one_hot(v: usize, hot: usize) -> Vec<f64> {
        let mut r = vec![0.0; v];
        r[hot] = 5.0;
        r
    }

    #[test]
    fn eos_first_gives_empty() {
        let mut t = Table(vec![one_hot(5, EOS_ID as usize)]);
        assert_eq!(generate_ids(&mut t, Strategy::Greedy, 10).unwrap(), Vec::<u32>::new());
        assert_eq!(generate_ids(&mut t, Strategy::Beam(3), 10).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn spells_table() {
        let vocab = Vocabulary::build(&["a b"], 6).unwrap();
        let (a, sp, b) = (vocab.id("a").unwrap(), vocab.id(" ").unwrap(), vocab.id("b").unwrap());
        let v = vocab.len();
        let mut t = Table(vec![
            one_hot(v, a as usize),
            one_hot(v, sp as usize),
            one_hot(v, b as usize),
            one_hot(v, EOS_ID as usize),
        ]);
        assert_eq!(generate(&mut t, &vocab, Strategy::Greedy, 10).unwrap(), "a b");
        assert_eq!(generate(&mut t, &vocab, Strategy::Beam(2), 10).unwrap(), "a b");
    }

    #[test]
    fn max_len_caps_output() {
        let mut t = Table(vec![one_hot(4, 3)]);
        assert_eq!(generate_ids(&mut t, Strategy::Greedy, 3).unwrap(), [3, 3, 3]);
        assert_eq!(generate_ids(&mut t, Strategy::Beam(2), 3).unwrap(), [3, 3, 3]);
        assert!(generate_ids(&mut t, Strategy::Greedy, 0).is_err());
    }

    #[test]
    fn ties_pick_lowest_index() {
        let mut t = Table(vec![vec![0.0, 0.0, 1.0, 1.0], one_hot(4, EOS_ID as usize)]);
        assert_eq!(generate_ids(&mut t, Strategy::Greedy, 5).unwrap(), [2]);
        assert_eq!(generate_ids(&mut t, Strategy::Beam(1), 5).unwrap(), [2]);
    }

    #[test]
    fn beam_finds_better_sequence_than_greedy() {
        // Greedy takes token 3 (0.55) and then faces a flat row where
        // end-of-sequence wins the tie; beam keeps token 4 (0.45), whose
        // end-of-sequence is nearly certain.
        struct Trap;
        impl NextTokenScorer for Trap {
            fn next_log_probs(&mut self, prefix: &[u32]) -> Result<Vec<f64>> {
                let mut p = vec![0.0f64; 8];
                match prefix {
                    [] => {
                        p[3] = 0.55;
                        p[4] = 0.45;
                    }
                    [3] => p[1..].iter_mut().for_each(|x| *x = 1.0 / 7.0),
                    [4] => {
                        p[1] = 0.99;
                        p[2..].iter_mut().for_each(|x| *x = 0.01 / 6.0);
                    }
                    _ => p[1] = 1.0,
                }
                Ok(p.iter().map(|&x| libm::log(x.max(1e-300))).collect())
            }
        }
        assert_eq!(generate_ids(&mut Trap, Strategy::Greedy, 5).unwrap(), [3]);
        assert_eq!(generate_ids(&mut Trap, Strategy::Beam(2), 5).unwrap(), [4]);
    }

    #[test]
    fn log_softmax_normalizes() {
        let lp = log_softmax(&[1.0, 2.0, 3.0]);
        let s: f64 = lp.iter().map(|&x| libm::exp(x)).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((lp[2] - lp[1] - 1.0).abs() < 1e-15);
    }
}
