//! Corpus BLEU, consistency accuracy and pool diversity for hand-written
//! outputs.
//!
//! cargo run --example bleu

use doc_reranker::eval::{
    candidate_pairwise_bleu, consistency_accuracy, corpus_bleu, corpus_bleu_with, Annotation, BleuOptions,
};
use doc_reranker::{Document, Result, Sentence};

fn main() -> Result<()> {
    let reference = vec![Document::from_lines(
        "d0",
        &["the cats sleep on the warm mat", "They purr loudly all night"],
    )?];
    let hyp = vec![Document::from_lines(
        "d0",
        &["the cat sleeps on the warm mat", "they purr loudly all night"],
    )?];

    let cased = corpus_bleu(&hyp, std::slice::from_ref(&reference), false)?;
    let lower = corpus_bleu(&hyp, std::slice::from_ref(&reference), true)?;
    let smooth = corpus_bleu_with(
        &hyp,
        std::slice::from_ref(&reference),
        BleuOptions {
            lowercase: true,
            smooth: true,
        },
    )?;
    println!(
        "cased {:.2}  lowercase {:.2}  smoothed {:.2}",
        cased.bleu, lower.bleu, smooth.bleu
    );
    println!(
        "precisions {:?}, brevity penalty {:.3}",
        lower.precisions, lower.brevity_penalty
    );

    let annotations = vec![Annotation {
        doc_id: "d0".into(),
        sent_index: 0,
        token_index: 1,
        consistent_form: "cats".into(),
        inconsistent_form: "cat".into(),
    }];
    println!(
        "consistency accuracy {:.2} (the hypothesis says cat)",
        consistency_accuracy(&hyp, &annotations)?
    );

    let pool: Vec<Sentence> = [
        "the cats sleep on the warm mat",
        "the cat sleeps on the warm mat",
        "a dog barks at the mat",
    ]
    .iter()
    .map(|s| s.parse())
    .collect::<Result<_>>()?;
    println!(
        "pairwise BLEU of the pool {:.2}",
        candidate_pairwise_bleu(&pool, BleuOptions::default())?
    );
    Ok(())
}
