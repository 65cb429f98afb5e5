//! Evaluation metrics.
//!
//! BLEU follows the `multi-bleu.perl` conventions: tokenized input, clipped
//! n-gram precisions up to 4-grams, the closest reference length (shorter on
//! ties) for the brevity penalty, and a score of 0 whenever some precision
//! is 0. Optional add-one smoothing of the n>1 precisions is available for
//! short sentences.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};
use crate::proposal::Lattice;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub lowercase: bool,
    pub smooth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// 0–100.
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    /// `100 · BP · exp(mean log p_n)` from the stored fields.
    pub fn recompute(&self) -> f64 {
        if self.precisions.iter().any(|&p| p <= 0.0) {
            return 0.0;
        }
        let mean = self.precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * self.brevity_penalty * mean.exp()
    }
}

/// Accumulated sufficient statistics.
#[derive(Clone, Copy, Debug, Default)]
struct BleuStats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn add(&mut self, hyp: &[&str], refs: &[Vec<&str>]) {
        for n in 1..=MAX_ORDER {
            if hyp.len() < n {
                continue;
            }
            let hyp_counts = ngram_counts(hyp, n);
            let mut max_ref: HashMap<&[&str], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(c);
                }
            }
            self.totals[n - 1] += hyp.len() + 1 - n;
            self.matches[n - 1] += hyp_counts
                .iter()
                .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
        self.hyp_len += hyp.len();
        let closest = refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&l| (l.abs_diff(hyp.len()), l))
            .unwrap_or(0);
        self.ref_len += closest;
    }

    fn report(&self, smooth: bool) -> BleuReport {
        let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| {
            if smooth && n > 0 {
                (self.matches[n] + 1) as f64 / (self.totals[n] + 1) as f64
            } else if self.totals[n] > 0 {
                self.matches[n] as f64 / self.totals[n] as f64
            } else {
                0.0
            }
        });
        let brevity_penalty = if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let mut r = BleuReport {
            bleu: 0.0,
            precisions,
            matches: self.matches,
            totals: self.totals,
            brevity_penalty,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
        };
        r.bleu = r.recompute();
        r
    }
}

fn ngram_counts<'a, 'b>(tokens: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_default() += 1;
    }
    counts
}

fn words(s: &Sentence, lowercase: bool) -> Vec<String> {
    s.iter()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// Corpus BLEU over all sentences of all documents. `refs[r]` is the r-th
/// reference set, aligned document-by-document and sentence-by-sentence
/// with `hyps`.
pub fn corpus_bleu(hyps: &[Document], refs: &[Vec<Document>], lowercase: bool) -> Result<BleuReport> {
    corpus_bleu_with(
        hyps,
        refs,
        BleuOptions {
            lowercase,
            smooth: false,
        },
    )
}

pub fn corpus_bleu_with(hyps: &[Document], refs: &[Vec<Document>], opts: BleuOptions) -> Result<BleuReport> {
    if refs.is_empty() {
        return Err(Error::invalid("BLEU needs at least one reference set"));
    }
    let mut pairs: Vec<(&Sentence, Vec<&Sentence>)> = Vec::new();
    for (r, set) in refs.iter().enumerate() {
        if set.len() != hyps.len() {
            return Err(Error::CountMismatch(format!(
                "reference set {r} has {} documents, hypotheses have {}",
                set.len(),
                hyps.len()
            )));
        }
    }
    for (d, hyp) in hyps.iter().enumerate() {
        for set in refs {
            if set[d].len() != hyp.len() {
                return Err(Error::CountMismatch(format!(
                    "document {}: {} hypothesis sentences vs {} reference sentences",
                    hyp.id,
                    hyp.len(),
                    set[d].len()
                )));
            }
        }
        for (i, s) in hyp.sentences.iter().enumerate() {
            pairs.push((s, refs.iter().map(|set| &set[d].sentences[i]).collect()));
        }
    }
    Ok(sentence_pairs_bleu(pairs.iter().map(|(h, r)| (*h, r.as_slice())), opts))
}

/// BLEU over arbitrary (hypothesis, references) sentence pairs.
pub fn sentence_pairs_bleu<'a, I>(pairs: I, opts: BleuOptions) -> BleuReport
where
    I: IntoIterator<Item = (&'a Sentence, &'a [&'a Sentence])>,
{
    let mut stats = BleuStats::default();
    for (hyp, refs) in pairs {
        let h = words(hyp, opts.lowercase);
        let r: Vec<Vec<String>> = refs.iter().map(|r| words(r, opts.lowercase)).collect();
        let h_ref: Vec<&str> = h.iter().map(String::as_str).collect();
        let r_ref: Vec<Vec<&str>> = r.iter().map(|x| x.iter().map(String::as_str).collect()).collect();
        stats.add(&h_ref, &r_ref);
    }
    stats.report(opts.smooth)
}

/// Mean BLEU of each pool member against each other member (ordered pairs,
/// self-pairs excluded). Each member is a whole system output.
pub fn pairwise_bleu(pool: &[Document], opts: BleuOptions) -> Result<f64> {
    if pool.len() < 2 {
        return Err(Error::invalid("pairwise BLEU needs a pool of at least two"));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, h) in pool.iter().enumerate() {
        for (j, r) in pool.iter().enumerate() {
            if i != j {
                sum += corpus_bleu_with(std::slice::from_ref(h), &[vec![r.clone()]], opts)?.bleu;
                pairs += 1;
            }
        }
    }
    Ok(sum / pairs as f64)
}

/// Pairwise BLEU of a single candidate set, each candidate treated as a
/// one-sentence output.
pub fn candidate_pairwise_bleu(candidates: &[Sentence], opts: BleuOptions) -> Result<f64> {
    let docs: Vec<Document> = candidates
        .iter()
        .map(|s| Document {
            id: String::new(),
            sentences: vec![s.clone()],
        })
        .collect();
    pairwise_bleu(&docs, opts)
}

/// Pool diversity over whole lattices: corpus BLEU whose sentence pairs are
/// every ordered pair of distinct candidates within every slot. Slots with a
/// single candidate contribute nothing.
pub fn lattice_pairwise_bleu(lattices: &[Lattice], opts: BleuOptions) -> Result<f64> {
    let mut pairs: Vec<(&Sentence, [&Sentence; 1])> = Vec::new();
    for lat in lattices {
        for slot in lat.slots() {
            for (i, a) in slot.iter().enumerate() {
                for (j, b) in slot.iter().enumerate() {
                    if i != j {
                        pairs.push((&a.tokens, [&b.tokens]));
                    }
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid("pairwise BLEU needs slots with at least two candidates"));
    }
    Ok(sentence_pairs_bleu(pairs.iter().map(|(h, r)| (*h, &r[..])), opts).bleu)
}

/// Fraction of slots whose chosen candidate is marked as a reference.
/// `marks[d][i][j]` says whether candidate `j` of slot `i` of document `d` is
/// a reference; `choices[d][i]` is the chosen candidate index.
pub fn oracle_pick_ratio(marks: &[Vec<Vec<bool>>], choices: &[Vec<usize>]) -> Result<f64> {
    if marks.len() != choices.len() {
        return Err(Error::CountMismatch(format!(
            "{} marked lattices vs {} decodes",
            marks.len(),
            choices.len()
        )));
    }
    let mut hits = 0usize;
    let mut slots = 0usize;
    for (d, (m, c)) in marks.iter().zip(choices).enumerate() {
        if m.len() != c.len() {
            return Err(Error::CountMismatch(format!(
                "document {d}: {} slots vs {} choices",
                m.len(),
                c.len()
            )));
        }
        for (i, (slot, &pick)) in m.iter().zip(c).enumerate() {
            if !slot.iter().any(|&b| b) {
                return Err(Error::invalid(format!("document {d} slot {i} has no marked reference")));
            }
            let &hit = slot
                .get(pick)
                .ok_or_else(|| Error::invalid(format!("document {d} slot {i}: choice {pick} out of range")))?;
            hits += hit as usize;
            slots += 1;
        }
    }
    if slots == 0 {
        return Err(Error::invalid("no slots to evaluate"));
    }
    Ok(hits as f64 / slots as f64)
}

/// A token position whose realization is fixed by context in another
/// sentence of the same document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub doc_id: String,
    pub sent_index: usize,
    pub token_index: usize,
    pub consistent_form: String,
    pub inconsistent_form: String,
}

/// Fraction of annotated positions realized with the consistent form.
/// An empty annotation set scores 1.0.
pub fn consistency_accuracy(outputs: &[Document], annotations: &[Annotation]) -> Result<f64> {
    let by_id: HashMap<&str, &Document> = outputs.iter().map(|d| (d.id.as_str(), d)).collect();
    if annotations.is_empty() {
        return Ok(1.0);
    }
    let mut ok = 0usize;
    for a in annotations {
        let doc = by_id
            .get(a.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(a.doc_id.clone()))?;
        let token = doc
            .sentences
            .get(a.sent_index)
            .and_then(|s| s.tokens().get(a.token_index))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "annotation {}:{}:{} points outside the output",
                    a.doc_id, a.sent_index, a.token_index
                ))
            })?;
        ok += (token.as_str() == a.consistent_form) as usize;
    }
    Ok(ok as f64 / annotations.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(lines: &[&str]) -> Document {
        Document::from_lines("d", lines).unwrap()
    }

    #[test]
    fn identity_is_100() {
        let h = vec![doc(&["the cat sat on the mat"])];
        let r = corpus_bleu(&h, std::slice::from_ref(&h), false).unwrap();
        assert_eq!(r.bleu, 100.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn no_overlap_is_zero() {
        let h = vec![doc(&["a b c d e"])];
        let r = vec![doc(&["v w x y z"])];
        assert_eq!(corpus_bleu(&h, &[r], false).unwrap().bleu, 0.0);
    }

    #[test]
    fn short_hypothesis_without_fourgrams() {
        // p1=p2=p3=1, no 4-grams -> 0 without smoothing; BP = exp(1 - 4/3)
        let h = vec![doc(&["the cat sat"])];
        let r = vec![doc(&["the cat sat down"])];
        let rep = corpus_bleu(&h, std::slice::from_ref(&r), false).unwrap();
        assert_eq!(rep.precisions, [1.0, 1.0, 1.0, 0.0]);
        assert!((rep.brevity_penalty - (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-12);
        assert_eq!(rep.bleu, 0.0);
        let smooth = corpus_bleu_with(
            &h,
            &[r],
            BleuOptions {
                lowercase: false,
                smooth: true,
            },
        )
        .unwrap();
        // p4 = (0+1)/(0+1) = 1
        assert!((smooth.bleu - 100.0 * (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_ties() {
        let h = vec![doc(&["a b c d e"])];
        let r1 = vec![doc(&["a b c d"])];
        let r2 = vec![doc(&["a b c d e f"])];
        let rep = corpus_bleu(&h, &[r1, r2], false).unwrap();
        assert_eq!(rep.ref_len, 4);
    }

    #[test]
    fn lowercase_flag() {
        let h = vec![doc(&["The Cat sat on the mat"])];
        let r = vec![doc(&["the cat sat on the MAT"])];
        let a = corpus_bleu(&h, std::slice::from_ref(&r), true).unwrap();
        assert_eq!(a.bleu, 100.0);
        assert!(corpus_bleu(&h, &[r], false).unwrap().bleu < 100.0);
    }

    #[test]
    fn misaligned_counts_rejected() {
        let h = vec![doc(&["a b"])];
        assert!(corpus_bleu(&h, &[vec![doc(&["a", "b"])]], false).is_err());
        assert!(corpus_bleu(&h, &[vec![]], false).is_err());
        assert!(corpus_bleu(&h, &[], false).is_err());
    }

    #[test]
    fn pairwise_extremes() {
        let same = vec![doc(&["a b c d e"]), doc(&["a b c d e"]), doc(&["a b c d e"])];
        assert_eq!(pairwise_bleu(&same, BleuOptions::default()).unwrap(), 100.0);
        let disjoint = vec![doc(&["a b c d"]), doc(&["e f g h"])];
        assert_eq!(pairwise_bleu(&disjoint, BleuOptions::default()).unwrap(), 0.0);
        assert!(pairwise_bleu(&same[..1], BleuOptions::default()).is_err());
    }

    #[test]
    fn pick_ratio() {
        let marks = vec![vec![vec![false, true], vec![true, false]]];
        assert_eq!(oracle_pick_ratio(&marks, &[vec![1, 0]]).unwrap(), 1.0);
        assert_eq!(oracle_pick_ratio(&marks, &[vec![0, 0]]).unwrap(), 0.5);
        assert!(oracle_pick_ratio(&[], &[]).is_err());
        assert!(oracle_pick_ratio(&[vec![vec![false, false]]], &[vec![0]]).is_err());
    }

    #[test]
    fn consistency_fraction() {
        let out = vec![doc(&["these x them", "this y it"])];
        let ann = |s: usize, t: usize, good: &str, bad: &str| Annotation {
            doc_id: "d".into(),
            sent_index: s,
            token_index: t,
            consistent_form: good.into(),
            inconsistent_form: bad.into(),
        };
        let anns = vec![
            ann(0, 0, "these", "this"),
            ann(0, 2, "them", "it"),
            ann(1, 0, "these", "this"),
            ann(1, 1, "y", "z"),
        ];
        assert_eq!(consistency_accuracy(&out, &anns).unwrap(), 0.75);
        assert!(consistency_accuracy(&out, &[ann(5, 0, "a", "b")]).is_err());
    }
}
