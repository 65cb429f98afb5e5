//! Train document- and sentence-level n-gram LMs on a synthetic corpus and
//! compare held-out perplexity by order.
//!
//! cargo run --release --example train_lm

use doc_reranker::lm::{perplexity_per_word, NGramLm, SentenceLevel};
use doc_reranker::synth::{generate_corpus, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = generate_corpus(&SynthConfig {
        num_docs: 300,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let held_out = generate_corpus(&SynthConfig {
        num_docs: 50,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let (train, held_out) = (train.corpus.targets(), held_out.corpus.targets());

    println!("order\tdoc ppl\tsent ppl");
    for order in 1..=4 {
        let doc = NGramLm::train(&train, order, 0.75)?;
        let sent = SentenceLevel(NGramLm::train_sentences(&train, order, 0.75)?);
        let d = perplexity_per_word(&doc, &held_out)?;
        let s = perplexity_per_word(&sent, &held_out)?;
        println!("{order}\t{:.3}\t{:.3}", d.perplexity, s.perplexity);
    }

    let lm = NGramLm::train(&train, 3, 0.75)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("tgt.3.arpa");
    lm.save(&path)?;
    let back = NGramLm::load(&path)?;
    println!(
        "saved {} ({} symbols), n-gram counts {:?}",
        path.display(),
        back.vocab_size(),
        back.ngram_counts()
    );
    println!("p(</s> | t0 t1) = {:.4}", back.prob(&["t0", "t1"], "</s>"));
    Ok(())
}
