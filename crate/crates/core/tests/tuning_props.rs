use doc_reranker::eval::corpus_bleu;
use doc_reranker::proposal::Lattice;
use doc_reranker::synth::{make_ambiguous_lattices, Benchmark, SynthConfig};
use doc_reranker::tuning::{decode_all, grid_search, grid_search_with, GridSpec};
use doc_reranker::Weights;

fn setup() -> (Benchmark, Vec<Lattice>) {
    let b = Benchmark::build(
        &SynthConfig {
            num_docs: 150,
            seed: 31,
            ..SynthConfig::default()
        },
        &SynthConfig {
            num_docs: 15,
            seed: 32,
            ..SynthConfig::default()
        },
        3,
        5,
    )
    .unwrap();
    let lattices = make_ambiguous_lattices(&b.test, 6, 30, 4).unwrap();
    (b, lattices)
}

fn small_grid() -> GridSpec {
    GridSpec {
        lambda1_values: vec![0.0, 1.0, 3.0],
        lambda2_values: vec![0.5, 2.0],
        lambda3_values: vec![0.0, 0.5],
    }
}

#[test]
fn table_has_one_row_per_point_in_order() {
    let (b, lat) = setup();
    let g = small_grid();
    let r = grid_search(&b.test.corpus, &lat, &b.doc_lm, &b.channel, &g, 3).unwrap();
    assert_eq!(r.table.len(), 12);
    let got: Vec<Weights> = r.table.iter().map(|row| row.weights).collect();
    assert_eq!(got, g.points());
    assert_eq!(r.to_tsv().lines().count(), 13);
    let best = r.table.iter().map(|row| row.metric).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.metric, best);
}

#[test]
fn single_point_grid_returns_that_point() {
    let (b, lat) = setup();
    let g = GridSpec {
        lambda1_values: vec![1.5],
        lambda2_values: vec![2.0],
        lambda3_values: vec![0.5],
    };
    let r = grid_search(&b.test.corpus, &lat, &b.doc_lm, &b.channel, &g, 3).unwrap();
    assert_eq!(r.best, Weights::new(1.5, 2.0, 0.5));
    assert_eq!(r.table.len(), 1);
}

#[test]
fn ties_go_to_the_earliest_point() {
    let (b, lat) = setup();
    let g = small_grid();
    let r = grid_search_with(&b.test.corpus, &lat, &b.doc_lm, &b.channel, &g, 3, |_| Ok(1.0)).unwrap();
    assert_eq!(r.best, g.points()[0]);
}

#[test]
fn best_weights_reproduce_the_reported_metric() {
    let (b, lat) = setup();
    let r = grid_search(&b.test.corpus, &lat, &b.doc_lm, &b.channel, &small_grid(), 3).unwrap();
    let refs: Vec<&Lattice> = lat.iter().collect();
    let out = decode_all(&refs, &b.doc_lm, &b.channel, &r.best, 3).unwrap();
    let bleu = corpus_bleu(&out, &[b.test.corpus.targets()], true).unwrap().bleu;
    assert_eq!(bleu, r.metric);
}

#[test]
fn missing_lattice_is_an_error() {
    let (b, lat) = setup();
    assert!(grid_search(&b.test.corpus, &lat[1..], &b.doc_lm, &b.channel, &small_grid(), 3).is_err());
}
