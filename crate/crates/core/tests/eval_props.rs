use doc_reranker::corpus::{Document, Sentence};
use doc_reranker::eval::{corpus_bleu, corpus_bleu_with, oracle_pick_ratio, pairwise_bleu, BleuOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn doc_strategy(id: usize) -> impl Strategy<Value = Document> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec!["a", "b", "C", "d", "E", "f"]), 1..7),
        1..4,
    )
    .prop_map(move |sents| {
        let lines: Vec<String> = sents.iter().map(|s| s.join(" ")).collect();
        Document::from_lines(format!("d{id}"), &lines).unwrap()
    })
}

fn aligned_pair() -> impl Strategy<Value = (Vec<Document>, Vec<Document>)> {
    prop::collection::vec((doc_strategy(0), doc_strategy(0)), 1..5).prop_map(|pairs| {
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (h, r))| {
                let n = h.len().min(r.len());
                let mk = |d: Document| Document {
                    id: format!("d{i}"),
                    sentences: d.sentences[..n].to_vec(),
                };
                (mk(h), mk(r))
            })
            .unzip()
    })
}

fn lower(docs: &[Document]) -> Vec<Document> {
    docs.iter()
        .map(|d| Document {
            id: d.id.clone(),
            sentences: d.sentences.iter().map(Sentence::to_lowercase).collect(),
        })
        .collect()
}

proptest! {
    #[test]
    fn bleu_is_recomputable_and_bounded((h, r) in aligned_pair()) {
        let rep = corpus_bleu(&h, &[r], false).unwrap();
        prop_assert!((0.0..=100.0).contains(&rep.bleu));
        prop_assert!((rep.recompute() - rep.bleu).abs() < 1e-9);
    }

    #[test]
    fn bleu_ignores_document_order((h, r) in aligned_pair()) {
        let a = corpus_bleu(&h, std::slice::from_ref(&r), false).unwrap().bleu;
        let (mut h2, mut r2) = (h.clone(), r.clone());
        h2.reverse();
        r2.reverse();
        let b = corpus_bleu(&h2, &[r2], false).unwrap().bleu;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn lowercase_flag_matches_prelowercased((h, r) in aligned_pair()) {
        let a = corpus_bleu(&h, std::slice::from_ref(&r), true).unwrap();
        let b = corpus_bleu(&lower(&h), &[lower(&r)], false).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pairwise_ignores_pool_order(pool in prop::collection::vec(doc_strategy(0), 2..5)) {
        let pool: Vec<Document> = pool.into_iter().map(|d| Document { id: "x".into(), sentences: vec![d.sentences[0].clone()] }).collect();
        let mut rev = pool.clone();
        rev.reverse();
        let a = pairwise_bleu(&pool, BleuOptions::default()).unwrap();
        let b = pairwise_bleu(&rev, BleuOptions::default()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn pairwise_is_mean_of_ordered_pairs() {
    let pool: Vec<Document> = ["a b c d e", "a b c d f", "a b x d e"]
        .iter()
        .map(|s| Document::from_lines("x", &[*s]).unwrap())
        .collect();
    let opts = BleuOptions::default();
    let mut sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                sum += corpus_bleu_with(&pool[i..=i], &[pool[j..=j].to_vec()], opts)
                    .unwrap()
                    .bleu;
            }
        }
    }
    let got = pairwise_bleu(&pool, opts).unwrap();
    assert!((got - sum / 6.0).abs() < 1e-12);
    // "a b c d e" vs "a b c d f": p = 4/5, 3/4, 2/3, 1/2
    let ab = 100.0 * (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
    let r = corpus_bleu_with(&pool[0..1], &[pool[1..2].to_vec()], opts)
        .unwrap()
        .bleu;
    assert!((r - ab).abs() < 1e-9);
}

#[test]
fn random_picker_hits_one_in_five() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut marks = Vec::new();
    let mut picks = Vec::new();
    for _ in 0..10 {
        let mut doc_marks = Vec::new();
        let mut doc_picks = Vec::new();
        for _ in 0..200 {
            let r = rng.gen_range(0..5);
            doc_marks.push((0..5).map(|j| j == r).collect());
            doc_picks.push(rng.gen_range(0..5));
        }
        marks.push(doc_marks);
        picks.push(doc_picks);
    }
    let ratio = oracle_pick_ratio(&marks, &picks).unwrap();
    assert!((ratio - 0.2).abs() <= 0.05, "{ratio}");
}
