//! Library-only decoding: propose, rerank by document and by sentence, and
//! inspect the score breakdown.
//!
//! cargo run --release --example decode

use doc_reranker::decoder::{doc_decode, exhaustive_decode, sent_rerank, Weights};
use doc_reranker::synth::{make_ambiguous_lattice, Benchmark, SynthConfig};
use doc_reranker::Result;

fn main() -> Result<()> {
    let bench = Benchmark::build(
        &SynthConfig {
            num_docs: 400,
            seed: 1,
            ..SynthConfig::default()
        },
        &SynthConfig {
            num_docs: 5,
            seed: 2,
            ..SynthConfig::default()
        },
        4,
        10,
    )?;
    let (src, reference) = &bench.test.corpus.docs[0];
    let lattice = make_ambiguous_lattice(src, reference, &bench.test.annotations, 6, 30, 0)?;
    let w = Weights::new(1.0, 1.0, 0.2);

    let doc = doc_decode(&lattice, &bench.doc_lm, &bench.channel, &w, 5)?;
    let sent = sent_rerank(&lattice, &bench.sent_lm, &bench.channel, &w)?;
    let exact = exhaustive_decode(&lattice, &bench.doc_lm, &bench.channel, &w)?;

    println!("document {}", src.id);
    for (i, s) in src.sentences.iter().enumerate() {
        let b = doc.breakdowns[i];
        println!("  source    {s}");
        println!("  reference {}", reference.sentences[i]);
        println!("  doc       {}", doc.output.sentences[i]);
        println!("  sent      {}", sent.output.sentences[i]);
        println!(
            "            q {:.2}  lm {:.2}  channel {:.2}  len {}  total {:.2}",
            b.proposal, b.lm, b.channel, b.length, b.total
        );
    }
    println!(
        "beam score {:.4} (stop {:.4}), exhaustive {:.4}, {} expansions",
        doc.final_score,
        doc.stop.unwrap_or(0.0),
        exact.final_score,
        doc.stats.expansions
    );
    Ok(())
}
