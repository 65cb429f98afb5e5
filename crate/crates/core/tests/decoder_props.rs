mod common;

use doc_reranker::decoder::{doc_decode, exhaustive_decode, exhaustive_decode_capped, sent_rerank, Weights};
use doc_reranker::lm::{LanguageModel, SentenceLevel};
use doc_reranker::proposal::Lattice;
use doc_reranker::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn lattice(seed: u64, k: usize, len: usize) -> Lattice {
    random_lattice(&mut ChaCha8Rng::seed_from_u64(seed), "p", k, len)
}

fn weights() -> impl Strategy<Value = Weights> {
    (0.0..3.0f64, 0.0..3.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| Weights::new(a, b, c))
}

proptest! {
    #[test]
    fn full_beam_is_exact(seed in any::<u64>(), k in 1usize..=4, len in 1usize..=4, w in weights()) {
        let lat = lattice(seed, k, len);
        let lm = HashLm { salt: seed };
        let ch = HashChannel { salt: seed ^ 1 };
        let beam = lat.slot_sizes().iter().product::<usize>();
        let b = doc_decode(&lat, &lm, &ch, &w, beam).unwrap();
        let e = exhaustive_decode(&lat, &lm, &ch, &w).unwrap();
        prop_assert_eq!(&b.chosen, &e.chosen);
        prop_assert!((b.final_score - e.final_score).abs() < 1e-9);
    }

    #[test]
    fn beam_never_beats_exhaustive(seed in any::<u64>(), beam in 1usize..4, w in weights()) {
        let lat = lattice(seed, 4, 4);
        let lm = HashLm { salt: seed };
        let ch = HashChannel { salt: seed ^ 2 };
        let b = doc_decode(&lat, &lm, &ch, &w, beam).unwrap();
        let e = exhaustive_decode(&lat, &lm, &ch, &w).unwrap();
        prop_assert!(b.final_score <= e.final_score + 1e-12);
    }

    #[test]
    fn scores_are_sums_of_breakdowns(seed in any::<u64>(), w in weights()) {
        let lat = lattice(seed, 3, 4);
        let lm = HashLm { salt: seed };
        let ch = HashChannel { salt: seed ^ 3 };
        let r = doc_decode(&lat, &lm, &ch, &w, 3).unwrap();
        let sum: f64 = r.breakdowns.iter().map(|b| b.total).sum();
        prop_assert!((sum - r.cumulative).abs() < 1e-9);
        prop_assert!((r.cumulative + r.stop.unwrap() - r.final_score).abs() < 1e-9);
        prop_assert_eq!(r.output.len(), lat.len());
        for (i, &j) in r.chosen.iter().enumerate() {
            prop_assert_eq!(&r.output.sentences[i], &lat.slot(i)[j].tokens);
            let b = r.breakdowns[i];
            let total = w.lambda1 * b.proposal + b.lm + w.lambda2 * b.channel + w.lambda3 * b.length as f64;
            prop_assert!((total - b.total).abs() < 1e-9);
        }
    }

    #[test]
    fn sentence_lm_makes_beam_and_rerank_agree(seed in any::<u64>(), beam in 1usize..6, w in weights()) {
        let lat = lattice(seed, 4, 5);
        let lm = SentenceLevel(HashLm { salt: seed });
        let ch = HashChannel { salt: seed ^ 4 };
        let d = doc_decode(&lat, &lm, &ch, &w, beam).unwrap();
        let s = sent_rerank(&lat, &lm, &ch, &w).unwrap();
        prop_assert_eq!(d.chosen, s.chosen);
    }

    #[test]
    fn decoding_is_deterministic(seed in any::<u64>(), w in weights()) {
        let lat = lattice(seed, 4, 4);
        let lm = HashLm { salt: seed };
        let ch = HashChannel { salt: seed };
        prop_assert_eq!(
            doc_decode(&lat, &lm, &ch, &w, 2).unwrap(),
            doc_decode(&lat, &lm, &ch, &w, 2).unwrap()
        );
    }
}

#[test]
fn exhaustive_cap_is_enforced() {
    let lat = lattice(3, 4, 5);
    let lm = HashLm { salt: 0 };
    let ch = HashChannel { salt: 0 };
    let paths = lat.path_count();
    let err = exhaustive_decode_capped(&lat, &lm, &ch, &Weights::default(), paths - 1.0).unwrap_err();
    assert!(matches!(err, Error::SearchSpaceTooLarge { .. }));
    assert!(exhaustive_decode_capped(&lat, &lm, &ch, &Weights::default(), paths).is_ok());
}

#[test]
fn zero_beam_rejected() {
    let lat = lattice(1, 2, 2);
    assert!(doc_decode(
        &lat,
        &HashLm { salt: 0 },
        &HashChannel { salt: 0 },
        &Weights::default(),
        0
    )
    .is_err());
}

#[test]
fn sentence_rerank_has_no_stop_term() {
    let lat = lattice(9, 3, 3);
    let lm = HashLm { salt: 1 };
    let r = sent_rerank(&lat, &lm, &HashChannel { salt: 1 }, &Weights::default()).unwrap();
    assert_eq!(r.stop, None);
    assert_eq!(r.final_score, r.cumulative);
    let _ = lm.initial_state();
}

/// Widening the beam can only help on average; over many random lattices
/// the larger beam is never worse in more than a small fraction of cases.
#[test]
fn wider_beam_is_rarely_worse() {
    let (mut worse, mut total) = (0, 0);
    for seed in 0..300u64 {
        let lat = lattice(seed, 4, 5);
        let lm = HashLm { salt: seed };
        let ch = HashChannel { salt: seed };
        let w = Weights::default();
        let mut prev = f64::NEG_INFINITY;
        for beam in [1, 2, 4, 8, 16, 256] {
            let s = doc_decode(&lat, &lm, &ch, &w, beam).unwrap().final_score;
            worse += (s < prev - 1e-12) as usize;
            total += 1;
            prev = s;
        }
    }
    assert!(
        worse * 20 < total,
        "{worse} of {total} beam increases lowered the score"
    );
}
