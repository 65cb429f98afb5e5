//! Pool diversity and reranked BLEU as more toy experts are merged.
//!
//! Each expert is a dictionary proposer with its own fixed noise, so its
//! mistakes are systematic. Pools of 1, 2 and 4 experts are formed from
//! disjoint groups of 8 experts and averaged.
//!
//! cargo run --release --example expert_diversity

use doc_reranker::decoder::{doc_decode, Weights};
use doc_reranker::eval::{corpus_bleu, lattice_pairwise_bleu, BleuOptions};
use doc_reranker::proposal::{merge_expert_pools, Lattice, ToyProposer};
use doc_reranker::synth::{toy_dictionary, Benchmark, PhenomenonMix, SynthConfig};
use doc_reranker::Result;

fn main() -> Result<()> {
    // token-by-token experts cannot restore a dropped pronoun
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
    let k = 16;
    let sources = bench.test.corpus.sources();
    let refs = vec![bench.test.corpus.targets()];

    let experts: Vec<Vec<Lattice>> = (0..8)
        .map(|e| {
            let p = ToyProposer {
                k,
                noise_scale: 3.0,
                noise_seed: 100 + e,
                expert_id: format!("e{e}"),
            };
            sources.iter().map(|d| p.propose(d, &dict)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    for n in [1, 2, 4] {
        let groups = experts.len() / n;
        let (mut pbleu, mut bleu) = (0.0, 0.0);
        for g in experts.chunks(n) {
            let merged = (0..sources.len())
                .map(|d| {
                    let pools: Vec<Lattice> = g.iter().map(|e| e[d].clone()).collect();
                    merge_expert_pools(&pools, k)
                })
                .collect::<Result<Vec<_>>>()?;
            pbleu += lattice_pairwise_bleu(&merged, BleuOptions::default())?;
            let out = merged
                .iter()
                .map(|l| doc_decode(l, &bench.doc_lm, &bench.channel, &Weights::default(), 5).map(|r| r.output))
                .collect::<Result<Vec<_>>>()?;
            bleu += corpus_bleu(&out, &refs, true)?.bleu;
        }
        let g = groups as f64;
        println!(
            "{n} expert(s): pairwise BLEU {:6.2}  doc-reranker BLEU {:6.2}",
            pbleu / g,
            bleu / g
        );
    }
    Ok(())
}
