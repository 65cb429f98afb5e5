//! Doc-reranker vs sent-reranker on synthetic documents with planted
//! cross-sentence ambiguities.
//!
//! cargo run --release --example synthetic_consistency

use doc_reranker::channel::Ibm1Model;
use doc_reranker::decoder::{doc_decode, sent_rerank, Weights};
use doc_reranker::eval::{consistency_accuracy, corpus_bleu};
use doc_reranker::lm::{NGramLm, SentenceLevel};
use doc_reranker::synth::{generate_corpus, make_ambiguous_lattices, SynthConfig};
use doc_reranker::{Document, Result};

fn main() -> Result<()> {
    let train = generate_corpus(&SynthConfig {
        num_docs: 400,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let test_cfg = SynthConfig {
        num_docs: 100,
        seed: 2,
        ..SynthConfig::default()
    };
    let test = generate_corpus(&test_cfg)?;

    let targets = train.corpus.targets();
    let doc_lm = NGramLm::train(&targets, 4, 0.75)?;
    let sent_lm = SentenceLevel(NGramLm::train_sentences(&targets, 4, 0.75)?);
    let (channel, _) = Ibm1Model::train(&train.corpus.sentence_pairs(), 10)?;

    let lattices = make_ambiguous_lattices(&test, 10, test_cfg.content_vocab, 3)?;
    let w = Weights::default();
    let mut doc_out = Vec::new();
    let mut sent_out = Vec::new();
    for l in &lattices {
        doc_out.push(doc_decode(l, &doc_lm, &channel, &w, 5)?.output);
        sent_out.push(sent_rerank(l, &sent_lm, &channel, &w)?.output);
    }
    let proposal_out: Vec<Document> = lattices
        .iter()
        .map(|l| Document {
            id: l.doc_id.clone(),
            sentences: l.slots().iter().map(|s| s[0].tokens.clone()).collect(),
        })
        .collect();

    let refs = vec![test.corpus.targets()];
    println!("annotations: {}", test.annotations.len());
    for (name, out) in [("doc", &doc_out), ("sent", &sent_out), ("proposal", &proposal_out)] {
        println!(
            "{name:>8}: consistency {:.3}  BLEU {:.2}",
            consistency_accuracy(out, &test.annotations)?,
            corpus_bleu(out, &refs, true)?.bleu
        );
    }
    Ok(())
}
