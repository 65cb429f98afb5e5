//! IBM Model 1 training on synthetic sentence pairs.
//!
//! cargo run --release --example train_channel

use doc_reranker::channel::{ChannelModel, Ibm1Model};
use doc_reranker::synth::{generate_corpus, inconsistent_variant, SynthConfig};
use doc_reranker::Result;

fn main() -> Result<()> {
    let corpus = generate_corpus(&SynthConfig {
        num_docs: 200,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let pairs = corpus.corpus.sentence_pairs();
    let (model, log) = Ibm1Model::train(&pairs, 10)?;

    for (i, ll) in log.log_likelihood.iter().enumerate() {
        println!("iteration {:>2}  log-likelihood {ll:.2}", i + 1);
    }

    for target in ["t0", "t7", "bank", "she"] {
        let best: Vec<String> = model
            .best_sources(target)
            .into_iter()
            .take(3)
            .map(|(s, p)| format!("{s}:{p:.3}"))
            .collect();
        println!("t(. | {target}) = {}", best.join(" "));
    }

    // the channel cannot tell the two readings of an ambiguous sentence apart
    let (x, y) = &pairs.pairs[0];
    let v = inconsistent_variant(y);
    println!("log p({x} | {y}) = {:.3}", model.channel_logprob(x, y));
    println!("log p({x} | {v}) = {:.3}", model.channel_logprob(x, &v));
    Ok(())
}
