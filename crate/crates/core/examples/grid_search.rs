//! Tune λ1, λ2, λ3 on a synthetic dev set over the default grid.
//!
//! cargo run --release --example grid_search

use doc_reranker::proposal::ToyProposer;
use doc_reranker::synth::{toy_dictionary, Benchmark, SynthConfig};
use doc_reranker::tuning::{grid_search, GridSpec};
use doc_reranker::Result;

fn main() -> Result<()> {
    let bench = Benchmark::build(
        &SynthConfig {
            num_docs: 400,
            seed: 1,
            ..SynthConfig::default()
        },
        &SynthConfig {
            num_docs: 40,
            seed: 3,
            ..SynthConfig::default()
        },
        4,
        10,
    )?;
    let dict = toy_dictionary(30, 2);
    let proposer = ToyProposer {
        k: 8,
        noise_scale: 1.0,
        noise_seed: 1,
        expert_id: "e0".into(),
    };
    let lattices = bench
        .test
        .corpus
        .sources()
        .iter()
        .map(|d| proposer.propose(d, &dict))
        .collect::<Result<Vec<_>>>()?;

    let grid = GridSpec::default();
    let result = grid_search(&bench.test.corpus, &lattices, &bench.doc_lm, &bench.channel, &grid, 5)?;
    let mut rows = result.table.clone();
    rows.sort_by(|a, b| b.metric.total_cmp(&a.metric));
    println!("{} grid points; top five:", rows.len());
    for r in rows.iter().take(5) {
        println!("  {}  BLEU {:.2}", r.weights, r.metric);
    }
    println!("selected {} with BLEU {:.2}", result.best, result.metric);
    Ok(())
}
