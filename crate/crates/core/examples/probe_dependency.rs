//! Does changing the first sentence move the decoder's choice for the second?
//!
//! cargo run --release --example probe_dependency

use doc_reranker::decoder::{posterior_dependency_probe, Weights};
use doc_reranker::synth::{make_ambiguous_lattices, Benchmark, SynthConfig};
use doc_reranker::Result;

fn main() -> Result<()> {
    let bench = Benchmark::build(
        &SynthConfig {
            num_docs: 400,
            seed: 1,
            ..SynthConfig::default()
        },
        &SynthConfig {
            num_docs: 60,
            seed: 2,
            ..SynthConfig::default()
        },
        4,
        10,
    )?;
    let lattices = make_ambiguous_lattices(&bench.test, 6, 30, 0)?;
    let w = Weights::default();
    let (mut changed, mut total) = (0, 0);
    for pair in lattices.chunks(2).filter(|c| c.len() == 2) {
        let (base, donor) = (&pair[0], &pair[1]);
        let r = posterior_dependency_probe(
            base,
            donor.source.sentences[0].clone(),
            donor.slot(0).to_vec(),
            &bench.doc_lm,
            &bench.channel,
            &w,
            5,
        )?;
        if r.changed && changed < 3 {
            println!("{}: '{}' -> '{}'", r.doc_id, r.base_choice, r.altered_choice);
        }
        changed += r.changed as usize;
        total += 1;
    }
    println!("{changed} of {total} second-sentence choices moved with the first sentence");
    Ok(())
}
