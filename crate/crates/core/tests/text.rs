use molcap_core::fusion::{assemble_decoder_input, FusedDecoderInput, MaskedRows};
use molcap_core::numerics::{AdamW, AdamWConfig, Dropout, Initializer, ParamStore, Tape, Tensor};
use molcap_core::text::{
    generate_ids, shift_right, ModelScorer, Strategy, TextModel, TokenSequence, TransformerConfig, Vocabulary, EOS_ID,
    PAD_ID,
};
use molcap_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: [&str; 4] = ["CCO", "c1ccccc1", "The molecule is an alcohol.", "It is an aromatic ring."];

fn tiny(seed: u64, v: usize) -> (ParamStore, TextModel) {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed);
    let config = TransformerConfig {
        vocab_size: v,
        d_model: 16,
        heads: 2,
        encoder_layers: 2,
        decoder_layers: 2,
        ff_hidden: 32,
        encoder_len: 8,
        decoder_len: 6,
        context_len: 12,
    };
    let model = TextModel::new(&mut store, &mut init, config).unwrap();
    (store, model)
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Tensor {
    let data = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(&[rows, d], data).unwrap()
}

fn context(tape: &mut Tape, rows: Tensor, mask: Vec<bool>) -> FusedDecoderInput {
    let n = mask.len();
    let values = tape.constant(rows).unwrap();
    let prompt = tape.slice_rows(values, 0, 2).unwrap();
    let rest = tape.slice_rows(values, 2, n - 2).unwrap();
    let p = MaskedRows { values: prompt, mask: mask[..2].to_vec() };
    let s = MaskedRows { values: rest, mask: mask[2..].to_vec() };
    assemble_decoder_input(tape, &p, None, None, Some(&s)).unwrap()
}

fn tokens(ids: &[u32]) -> TokenSequence {
    TokenSequence { ids: ids.to_vec(), mask: ids.iter().map(|&i| i != PAD_ID).collect(), raw_text: None }
}

#[test]
fn round_trip_on_training_corpus() {
    for v in [40, 60, 120] {
        let vocab = Vocabulary::build(&CORPUS, v).unwrap();
        for s in CORPUS {
            assert_eq!(vocab.decode(&vocab.encode(s)), s);
        }
    }
}

#[test]
fn frequency_oracle_picks_first_merge() {
    let corpus = ["abab", "cdcd", "abab"];
    let mut counts = std::collections::BTreeMap::<(char, char), usize>::new();
    for s in corpus {
        let c: Vec<char> = s.chars().collect();
        for w in c.windows(2) {
            *counts.entry((w[0], w[1])).or_default() += 1;
        }
    }
    let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap().0;
    let vocab = Vocabulary::build(&corpus, 3 + 4 + 1).unwrap();
    assert_eq!(vocab.tokens().last().unwrap(), &format!("{}{}", best.0, best.1));
}

#[test]
fn encoder_shape_and_budget() {
    let (store, model) = tiny(1, 30);
    let mut tape = Tape::new();
    let t = tokens(&[5, 6, 7, 0, 0, 0, 0, 0]);
    let out = model.encode(&mut tape, &store, &t, &mut Dropout::off()).unwrap();
    assert_eq!(tape.shape(out.hidden), [8, 16]);
    let long = tokens(&[5; 9]);
    assert!(matches!(model.encode(&mut tape, &store, &long, &mut Dropout::off()), Err(Error::Dimension(_))));
    let bad = tokens(&[40, 5]);
    assert!(matches!(model.encode(&mut tape, &store, &bad, &mut Dropout::off()), Err(Error::Dimension(_))));
}

#[test]
fn encoder_ignores_pad_embeddings() {
    let (store, model) = tiny(2, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mask = [true, false, true, true, false, false, true, false];
    let base = random_rows(&mut rng, 8, 16);
    let mut tape = Tape::new();
    let x = tape.constant(base.clone()).unwrap();
    let a = model.encode_embedded(&mut tape, &store, x, &mask, &mut Dropout::off()).unwrap();
    for trial in 0..5 {
        let mut perturbed = base.clone();
        for (r, &m) in mask.iter().enumerate() {
            if !m {
                perturbed.row_mut(r).iter_mut().for_each(|v| *v += rng.random_range(-5.0..5.0) * (trial + 1) as f64);
            }
        }
        let y = tape.constant(perturbed).unwrap();
        let b = model.encode_embedded(&mut tape, &store, y, &mask, &mut Dropout::off()).unwrap();
        for (r, &m) in mask.iter().enumerate() {
            if m {
                assert_eq!(tape.value(a.hidden).row(r), tape.value(b.hidden).row(r));
            }
        }
    }
    for p in &a.attention {
        for r in 0..tape.value(*p).rows() {
            let s: f64 = tape.value(*p).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn decoder_logits_shape_and_context_checks() {
    let (store, model) = tiny(4, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::new();
    let ctx = context(&mut tape, random_rows(&mut rng, 6, 16), vec![true; 6]);
    let target = tokens(&[5, 6, EOS_ID, 0, 0, 0]);
    let out = model.decoder_forward(&mut tape, &store, &ctx, &target, &mut Dropout::off()).unwrap();
    assert_eq!(tape.shape(out.logits), [6, 30]);
    let too_long = context(&mut tape, random_rows(&mut rng, 13, 16), vec![true; 13]);
    let err = model.decoder_forward(&mut tape, &store, &too_long, &target, &mut Dropout::off());
    assert!(matches!(err, Err(Error::Dimension(_))));
}

#[test]
fn decoder_rows_ignore_later_targets() {
    let (store, model) = tiny(6, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = random_rows(&mut rng, 7, 16);
    for _ in 0..10 {
        let mut tape = Tape::new();
        let ctx = context(&mut tape, rows.clone(), vec![true; 7]);
        let a: Vec<u32> = (0..6).map(|_| rng.random_range(3..30)).collect();
        let mut b = a.clone();
        let t = rng.random_range(1..6);
        for id in &mut b[t..] {
            *id = rng.random_range(3..30);
        }
        let la = model.decoder_forward(&mut tape, &store, &ctx, &tokens(&a), &mut Dropout::off()).unwrap().logits;
        let lb = model.decoder_forward(&mut tape, &store, &ctx, &tokens(&b), &mut Dropout::off()).unwrap().logits;
        // Row r sees inputs 0..=r, i.e. targets 0..r.
        for r in 0..=t {
            assert_eq!(tape.value(la).row(r), tape.value(lb).row(r), "row {r}, change from {t}");
        }
    }
}

#[test]
fn decoder_ignores_masked_context_rows() {
    let (store, model) = tiny(8, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mask = vec![true, true, true, false, true, false, false, true, false];
    let rows = random_rows(&mut rng, 9, 16);
    let mut perturbed = rows.clone();
    for (r, &m) in mask.iter().enumerate() {
        if !m {
            perturbed.row_mut(r).iter_mut().for_each(|v| *v = rng.random_range(-9.0..9.0));
        }
    }
    let target = tokens(&[5, 9, 7, EOS_ID, 0, 0]);
    let mut tape = Tape::new();
    let ca = context(&mut tape, rows, mask.clone());
    let cb = context(&mut tape, perturbed, mask);
    let la = model.decoder_forward(&mut tape, &store, &ca, &target, &mut Dropout::off()).unwrap();
    let lb = model.decoder_forward(&mut tape, &store, &cb, &target, &mut Dropout::off()).unwrap();
    assert_eq!(tape.value(la.logits).data(), tape.value(lb.logits).data());
    for p in la.self_attention.iter().chain(&la.cross_attention) {
        for r in 0..tape.value(*p).rows() {
            let s: f64 = tape.value(*p).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn shift_right_prepends_pad() {
    assert_eq!(shift_right(&[4, 5, 1]), [0, 4, 5]);
    assert!(shift_right(&[]).is_empty());
}

#[test]
fn beam_of_one_equals_greedy_on_random_models() {
    for seed in 0..6 {
        let (store, model) = tiny(100 + seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, 5, 16);
        let run = |strategy| {
            let mut tape = Tape::no_grad();
            let ctx = context(&mut tape, rows.clone(), vec![true; 5]);
            let mut scorer = ModelScorer::new(&model, &store, &mut tape, &ctx).unwrap();
            generate_ids(&mut scorer, strategy, 5).unwrap()
        };
        assert_eq!(run(Strategy::Greedy), run(Strategy::Beam(1)), "seed {seed}");
    }
}

#[test]
fn scorer_matches_teacher_forced_logits() {
    let (store, model) = tiny(11, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows = random_rows(&mut rng, 5, 16);
    let target = tokens(&[4, 9, 13, EOS_ID, 0, 0]);
    let mut tape = Tape::new();
    let ctx = context(&mut tape, rows.clone(), vec![true; 5]);
    let full = model.decoder_forward(&mut tape, &store, &ctx, &target, &mut Dropout::off()).unwrap();
    let full = tape.value(full.logits).clone();
    let mut tape = Tape::no_grad();
    let ctx = context(&mut tape, rows, vec![true; 5]);
    let mut scorer = ModelScorer::new(&model, &store, &mut tape, &ctx).unwrap();
    use molcap_core::text::{log_softmax, NextTokenScorer};
    for t in 0..3 {
        let lp = scorer.next_log_probs(&target.ids[..t]).unwrap();
        let want = log_softmax(full.row(t));
        for (a, b) in lp.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn overfit_single_pair_loss_decreases_at_the_end() {
    let (mut store, model) = tiny(13, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let rows = random_rows(&mut rng, 4, 16);
    let target = tokens(&[4, 9, 13, 7, EOS_ID, 0]);
    let mut opt = AdamW::new(AdamWConfig { lr: 1e-3, ..Default::default() }, &store);
    let mut losses = Vec::new();
    for _ in 0..2000 {
        let mut tape = Tape::new();
        let ctx = context(&mut tape, rows.clone(), vec![true; 4]);
        let loss = model.loss(&mut tape, &store, &ctx, &target, &mut Dropout::off()).unwrap();
        losses.push(tape.value(loss).item().unwrap());
        tape.backward(loss).unwrap();
        store.zero_grad();
        tape.accumulate_into(&mut store);
        opt.step(&mut store).unwrap();
    }
    let tail = &losses[1900..];
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{:?}", &tail[..5]);
    assert!(losses[1999] < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenizer_round_trips(words in prop::collection::vec("[a-zC=()1-3 ]{1,12}", 1..6), v in 20usize..200) {
        let vocab = Vocabulary::build(&words, v.max(3 + 20)).unwrap();
        for w in &words {
            prop_assert_eq!(&vocab.decode(&vocab.encode(w)), w);
        }
    }

    #[test]
    fn encode_text_pads_to_budget(s in "[a-c ]{0,20}", budget in 1usize..16, eos in any::<bool>()) {
        let vocab = Vocabulary::build(&["abc a b c"], 12).unwrap();
        let t = vocab.encode_text(&s, budget, eos).unwrap();
        prop_assert_eq!(t.ids.len(), budget);
        for (id, m) in t.ids.iter().zip(&t.mask) {
            prop_assert_eq!(*m, *id != PAD_ID);
        }
    }
}
