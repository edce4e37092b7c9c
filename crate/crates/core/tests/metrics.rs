use molcap_core::metrics::{bleu, lcs_len, meteor, rouge_l, rouge_n, score_corpus, tokenize, BLEU_EPSILON};
use molcap_core::Error;
use proptest::prelude::*;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Clipped matches and candidate total by pairwise scanning.
fn brute_overlap(c: &[String], r: &[String], n: usize) -> (usize, usize) {
    if c.len() < n {
        return (0, 0);
    }
    let grams_c: Vec<&[String]> = c.windows(n).collect();
    let grams_r: Vec<&[String]> = if r.len() >= n { r.windows(n).collect() } else { vec![] };
    let mut matched = 0;
    for (i, g) in grams_c.iter().enumerate() {
        if grams_c[..i].contains(g) {
            continue;
        }
        let in_c = grams_c.iter().filter(|x| *x == g).count();
        let in_r = grams_r.iter().filter(|x| *x == g).count();
        matched += in_c.min(in_r);
    }
    (matched, grams_c.len())
}

fn brute_bleu(cands: &[Vec<String>], refs: &[Vec<String>], n_max: usize) -> f64 {
    let c_len: usize = cands.iter().map(Vec::len).sum();
    let r_len: usize = refs.iter().map(Vec::len).sum();
    if c_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let (mut m, mut t) = (0, 0);
        for (c, r) in cands.iter().zip(refs) {
            let (a, b) = brute_overlap(c, r, n);
            m += a;
            t += b;
        }
        let num = if m == 0 { BLEU_EPSILON } else { m as f64 };
        log_sum += (num / t.max(1) as f64).ln();
    }
    let bp = if c_len < r_len { (1.0 - r_len as f64 / c_len as f64).exp() } else { 1.0 };
    bp * (log_sum / n_max as f64).exp()
}

fn is_subsequence(small: &[&String], big: &[String]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == *s))
}

fn brute_lcs(a: &[String], b: &[String]) -> usize {
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

#[test]
fn worked_bleu_example() {
    let c = vec![words("the cat sat on the mat")];
    let r = vec![words("the cat is on the mat")];
    assert!((bleu(&c, &r, 2).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((bleu(&c, &r, 1).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    let short = vec![words("the cat")];
    let bp = (1.0f64 - 6.0 / 2.0).exp();
    assert!((bleu(&short, &r, 2).unwrap() - bp).abs() < 1e-12);
}

#[test]
fn clipped_unigram_precision() {
    let c = vec![words("the the the")];
    let r = vec![words("the cat")];
    assert!((bleu(&c, &r, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn worked_meteor_examples() {
    let r = words("a b c d");
    assert!((meteor(&words("a b c d"), &r).unwrap() - (1.0 - 0.5 / 64.0)).abs() < 1e-12);
    assert!((meteor(&words("c d a b"), &r).unwrap() - (1.0 - 0.5 / 8.0)).abs() < 1e-12);
    assert_eq!(meteor(&words("x y"), &r).unwrap(), 0.0);
}

#[test]
fn worked_rouge_examples() {
    let r = words("the cat is on the mat");
    let c = words("the cat sat on the mat");
    assert!((rouge_n(&c, &r, 1).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert!((rouge_n(&c, &r, 2).unwrap() - 3.0 / 5.0).abs() < 1e-12);
    assert!((rouge_l(&c, &r).unwrap() - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn self_match_is_perfect() {
    let refs = ["The molecule is ethanol, a primary alcohol.", "It is a conjugate acid of acetate."];
    let s = score_corpus(&refs, &refs).unwrap();
    for v in s.values() {
        assert!(v > 0.98 && v <= 1.0, "{s:?}");
    }
    assert_eq!([s.bleu2, s.bleu4, s.rouge1, s.rouge2, s.rouge_l], [1.0; 5]);
}

#[test]
fn contract_errors() {
    let empty: [&str; 0] = [];
    assert!(matches!(score_corpus(&empty, &empty), Err(Error::Contract(_))));
    assert!(matches!(score_corpus(&["a"], &["a", "b"]), Err(Error::Contract(_))));
    assert!(matches!(rouge_l(&words("a"), &[]), Err(Error::Contract(_))));
}

#[test]
fn tokenizer_lowercases_and_splits_punctuation() {
    assert_eq!(tokenize("It is (R)-Ethanol."), ["it", "is", "(", "r", ")", "-", "ethanol", "."]);
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from), 0..9)
}

proptest! {
    #[test]
    fn lcs_matches_exhaustive_search(a in sentence(), b in sentence()) {
        prop_assert_eq!(lcs_len(&a, &b), brute_lcs(&a, &b));
        prop_assert_eq!(lcs_len(&a, &b), lcs_len(&b, &a));
    }

    #[test]
    fn bleu_matches_brute_force(pairs in prop::collection::vec((sentence(), sentence()), 1..5), n in 1usize..5) {
        let (c, r): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let got = bleu(&c, &r, n).unwrap();
        let want = brute_bleu(&c, &r, n);
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", got, want);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn unigram_bleu_ignores_candidate_order(c in sentence(), r in sentence(), seed in any::<u64>()) {
        let mut shuffled = c.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
        }
        let a = bleu(&[c], &[r.clone()], 1).unwrap();
        let b = bleu(&[shuffled], &[r], 1).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn meteor_self_match_is_exact(m in 1usize..40) {
        let s: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
        prop_assert_eq!(meteor(&s, &s).unwrap(), 1.0 - 0.5 / (m * m * m) as f64);
    }

    #[test]
    fn rouge_is_symmetric_and_bounded(a in sentence(), b in sentence(), n in 1usize..3) {
        prop_assume!(!a.is_empty() && !b.is_empty());
        let x = rouge_n(&a, &b, n).unwrap();
        prop_assert!((x - rouge_n(&b, &a, n).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
        let (m, t) = brute_overlap(&a, &b, n);
        let (_, rt) = brute_overlap(&b, &a, n);
        let want = if m == 0 { 0.0 } else { 2.0 * m as f64 / (t + rt) as f64 };
        prop_assert!((x - want).abs() < 1e-12);
        let l = rouge_l(&a, &b).unwrap();
        prop_assert!((l - rouge_l(&b, &a).unwrap()).abs() < 1e-12);
        let m = meteor(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
    }
}
