//! How often each ranker puts a hidden reference first.
//!
//! cargo run --release --example oracle_pick

use doc_reranker::decoder::{doc_decode, sent_rerank, Weights};
use doc_reranker::eval::oracle_pick_ratio;
use doc_reranker::proposal::ToyProposer;
use doc_reranker::synth::{toy_dictionary, Benchmark, PhenomenonMix, SynthConfig};
use doc_reranker::Result;

fn main() -> Result<()> {
    let mix = PhenomenonMix {
        number: 1.0 / 3.0,
        tense: 1.0 / 3.0,
        lexical: 1.0 / 3.0,
        pronoun: 0.0,
    };
    let train = SynthConfig {
        num_docs: 400,
        seed: 1,
        mix,
        ..SynthConfig::default()
    };
    let test = SynthConfig {
        num_docs: 100,
        seed: 2,
        mix,
        ..SynthConfig::default()
    };
    let bench = Benchmark::build(&train, &test, 4, 10)?;
    let dict = toy_dictionary(test.content_vocab, 2);
    let proposer = ToyProposer {
        k: 10,
        noise_scale: 1.0,
        noise_seed: 5,
        expert_id: "e0".into(),
    };

    let mut marks = Vec::new();
    let (mut doc, mut sent, mut proposal) = (Vec::new(), Vec::new(), Vec::new());
    let w = Weights::default();
    for (src, reference) in &bench.test.corpus.docs {
        let pool = proposer.propose(src, &dict)?;
        // the reference enters at the bottom of every slot
        let floor = pool
            .slots()
            .iter()
            .flatten()
            .map(|c| c.proposal_logprob)
            .fold(f64::INFINITY, f64::min);
        let lat = pool.with_references(reference, floor, "reference")?;
        marks.push(lat.reference_marks(&[reference]));
        doc.push(doc_decode(&lat, &bench.doc_lm, &bench.channel, &w, 5)?.chosen);
        sent.push(sent_rerank(&lat, &bench.sent_lm, &bench.channel, &w)?.chosen);
        proposal.push(vec![0; lat.len()]);
    }
    println!("doc-reranker  {:.3}", oracle_pick_ratio(&marks, &doc)?);
    println!("sent-reranker {:.3}", oracle_pick_ratio(&marks, &sent)?);
    println!("proposal only {:.3}", oracle_pick_ratio(&marks, &proposal)?);
    Ok(())
}
