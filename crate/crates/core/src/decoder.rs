//! Document decoding over candidate lattices.
//!
//! Each sentence extension is scored with
//!
//! ```text
//! total = λ1·log q(y|x) + λ_lm·log p_LM(y | prefix) + λ2·log p_TM(x | y) + λ3·|y|
//! ```
//!
//! and a hypothesis' objective is the running sum of its extension totals.
//! [`doc_decode`] is the left-to-right beam search; after the last sentence
//! every expansion receives `λ_lm·log p_LM(</doc> | document)` before the
//! final selection. [`exhaustive_decode`] enumerates every path and is the
//! reference oracle; [`sent_rerank`] scores every slot independently with
//! the LM reset to its initial state.
//!
//! Ties are broken by the lexicographically smaller vector of chosen
//! candidate indices, so results are deterministic.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};
use crate::lm::LanguageModel;
use crate::proposal::{Candidate, Lattice};

pub const DEFAULT_EXHAUSTIVE_CAP: f64 = 1e6;

/// Interpolation weights: λ1 (proposal), λ2 (channel), λ3 (length) and the
/// LM coefficient, which is 1 unless an ablation silences the LM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    #[serde(default = "one")]
    pub lambda_lm: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Weights {
    fn default() -> Self {
        Weights::new(1.0, 1.0, 0.0)
    }
}

impl Weights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Weights {
            lambda1,
            lambda2,
            lambda3,
            lambda_lm: 1.0,
        }
    }

    pub fn with_lm(mut self, lambda_lm: f64) -> Self {
        self.lambda_lm = lambda_lm;
        self
    }

    /// Channel times LM only: the plain noisy-channel objective.
    pub fn noisy_channel() -> Self {
        Weights::new(0.0, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2, self.lambda3, self.lambda_lm]
            .iter()
            .all(|w| w.is_finite())
        {
            Ok(())
        } else {
            Err(Error::invalid(format!("non-finite weight in {self}")))
        }
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.lambda1, self.lambda2, self.lambda3, self.lambda_lm
        )
    }
}

/// Parses `l1,l2,l3` or `l1,l2,l3,llm`.
impl FromStr for Weights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::invalid(format!("weights {s:?}: {e}")))?;
        let w = match parts[..] {
            [a, b, c] => Weights::new(a, b, c),
            [a, b, c, d] => Weights::new(a, b, c).with_lm(d),
            _ => return Err(Error::invalid(format!("weights {s:?}: expected l1,l2,l3[,llm]"))),
        };
        w.validate()?;
        Ok(w)
    }
}

/// The four addends of one sentence extension and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub proposal: f64,
    pub lm: f64,
    pub channel: f64,
    pub length: usize,
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn new(weights: &Weights, proposal: f64, lm: f64, channel: f64, length: usize) -> Self {
        let total = weights.lambda1 * proposal
            + weights.lambda_lm * lm
            + weights.lambda2 * channel
            + weights.lambda3 * length as f64;
        ScoreBreakdown {
            proposal,
            lm,
            channel,
            length,
            total,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Hypothesis<S> {
    pub chosen: Vec<usize>,
    pub cumulative: f64,
    pub lm_state: S,
    pub breakdowns: Vec<ScoreBreakdown>,
}

impl<S: Clone> Hypothesis<S> {
    pub fn initial(lm_state: S) -> Self {
        Hypothesis {
            chosen: Vec::new(),
            cumulative: 0.0,
            lm_state,
            breakdowns: Vec::new(),
        }
    }

    fn extend(&self, index: usize, breakdown: ScoreBreakdown, lm_state: S) -> Self {
        let mut chosen = Vec::with_capacity(self.chosen.len() + 1);
        chosen.extend_from_slice(&self.chosen);
        chosen.push(index);
        let mut breakdowns = Vec::with_capacity(self.breakdowns.len() + 1);
        breakdowns.extend_from_slice(&self.breakdowns);
        breakdowns.push(breakdown);
        Hypothesis {
            chosen,
            cumulative: self.cumulative + breakdown.total,
            lm_state,
            breakdowns,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamStats {
    /// Scored (hypothesis, candidate) extensions.
    pub expansions: usize,
    /// Extensions discarded by beam pruning.
    pub pruned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub doc_id: String,
    pub output: Document,
    pub chosen: Vec<usize>,
    /// `cumulative + λ_lm·stop` (just `cumulative` for sentence reranking).
    pub final_score: f64,
    pub cumulative: f64,
    /// Unweighted `log p(</doc> | document)`, absent for sentence reranking.
    pub stop: Option<f64>,
    pub breakdowns: Vec<ScoreBreakdown>,
    pub stats: BeamStats,
}

/// Scores extending a hypothesis in state `lm_state` with `candidate`.
pub fn score_extension<L: LanguageModel, C: ChannelModel>(
    weights: &Weights,
    lm: &L,
    channel: &C,
    lm_state: &L::State,
    source: &Sentence,
    candidate: &Candidate,
) -> (ScoreBreakdown, L::State) {
    let (lm_score, next) = lm.sentence_logprob(lm_state, &candidate.tokens);
    let channel_score = channel.channel_logprob(source, &candidate.tokens);
    let b = ScoreBreakdown::new(
        weights,
        candidate.proposal_logprob,
        lm_score,
        channel_score,
        candidate.tokens.len(),
    );
    (b, next)
}

/// Higher score first, then lexicographically smaller index vector.
fn rank(a_score: f64, a_chosen: &[usize], b_score: f64, b_chosen: &[usize]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_chosen.cmp(b_chosen))
}

fn finish<S>(
    lattice: &Lattice,
    best: Hypothesis<S>,
    stop: Option<f64>,
    final_score: f64,
    stats: BeamStats,
) -> DecodeResult {
    let sentences = best
        .chosen
        .iter()
        .enumerate()
        .map(|(i, &j)| lattice.slot(i)[j].tokens.clone())
        .collect();
    DecodeResult {
        doc_id: lattice.doc_id.clone(),
        output: Document {
            id: lattice.doc_id.clone(),
            sentences,
        },
        chosen: best.chosen,
        final_score,
        cumulative: best.cumulative,
        stop,
        breakdowns: best.breakdowns,
        stats,
    }
}

/// Channel score and length per slot candidate, which do not depend on the
/// document prefix.
fn channel_table<C: ChannelModel>(lattice: &Lattice, channel: &C) -> Vec<Vec<f64>> {
    lattice
        .slots()
        .iter()
        .zip(&lattice.source.sentences)
        .map(|(slot, src)| slot.iter().map(|c| channel.channel_logprob(src, &c.tokens)).collect())
        .collect()
}

/// Left-to-right beam search keeping at most `beam` hypotheses per slot.
pub fn doc_decode<L: LanguageModel, C: ChannelModel>(
    lattice: &Lattice,
    lm: &L,
    channel: &C,
    weights: &Weights,
    beam: usize,
) -> Result<DecodeResult> {
    if beam < 1 {
        return Err(Error::invalid("beam size must be at least 1"));
    }
    weights.validate()?;
    let channel_scores = channel_table(lattice, channel);
    let mut stats = BeamStats::default();
    let mut hyps = vec![Hypothesis::initial(lm.initial_state())];
    let last = lattice.len() - 1;

    for (i, slot) in lattice.slots().iter().enumerate() {
        let mut next: Vec<(f64, Hypothesis<L::State>)> = Vec::with_capacity(hyps.len() * slot.len());
        for h in &hyps {
            for (j, cand) in slot.iter().enumerate() {
                let (lm_score, state) = lm.sentence_logprob(&h.lm_state, &cand.tokens);
                let b = ScoreBreakdown::new(
                    weights,
                    cand.proposal_logprob,
                    lm_score,
                    channel_scores[i][j],
                    cand.tokens.len(),
                );
                let ext = h.extend(j, b, state);
                let key = if i == last {
                    ext.cumulative + weights.lambda_lm * lm.stop_logprob(&ext.lm_state)
                } else {
                    ext.cumulative
                };
                next.push((key, ext));
            }
        }
        stats.expansions += next.len();
        next.sort_by(|(ka, a), (kb, b)| rank(*ka, &a.chosen, *kb, &b.chosen));
        if i == last {
            let (final_score, best) = next.into_iter().next().expect("non-empty slot");
            let stop = lm.stop_logprob(&best.lm_state);
            return Ok(finish(lattice, best, Some(stop), final_score, stats));
        }
        if next.len() > beam {
            stats.pruned += next.len() - beam;
            next.truncate(beam);
        }
        hyps = next.into_iter().map(|(_, h)| h).collect();
    }
    unreachable!("lattices have at least one slot")
}

/// Scores every path through the lattice and returns the exact argmax.
pub fn exhaustive_decode<L: LanguageModel, C: ChannelModel>(
    lattice: &Lattice,
    lm: &L,
    channel: &C,
    weights: &Weights,
) -> Result<DecodeResult> {
    exhaustive_decode_capped(lattice, lm, channel, weights, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn exhaustive_decode_capped<L: LanguageModel, C: ChannelModel>(
    lattice: &Lattice,
    lm: &L,
    channel: &C,
    weights: &Weights,
    cap: f64,
) -> Result<DecodeResult> {
    weights.validate()?;
    let paths = lattice.path_count();
    if paths > cap {
        return Err(Error::SearchSpaceTooLarge { paths, cap });
    }
    let channel_scores = channel_table(lattice, channel);
    let mut search = Exhaustive {
        lattice,
        lm,
        weights,
        channel_scores: &channel_scores,
        best: None,
        expansions: 0,
    };
    search.visit(Hypothesis::initial(lm.initial_state()));
    let (final_score, best) = search.best.expect("at least one path");
    let stats = BeamStats {
        expansions: search.expansions,
        pruned: 0,
    };
    let stop = lm.stop_logprob(&best.lm_state);
    Ok(finish(lattice, best, Some(stop), final_score, stats))
}

struct Exhaustive<'a, L: LanguageModel> {
    lattice: &'a Lattice,
    lm: &'a L,
    weights: &'a Weights,
    channel_scores: &'a [Vec<f64>],
    best: Option<(f64, Hypothesis<L::State>)>,
    expansions: usize,
}

impl<L: LanguageModel> Exhaustive<'_, L> {
    // depth-first in lexicographic index order, so the first path reaching
    // the best score wins ties
    fn visit(&mut self, h: Hypothesis<L::State>) {
        let i = h.chosen.len();
        if i == self.lattice.len() {
            let score = h.cumulative + self.weights.lambda_lm * self.lm.stop_logprob(&h.lm_state);
            let better = match &self.best {
                None => true,
                Some((s, b)) => rank(score, &h.chosen, *s, &b.chosen) == Ordering::Less,
            };
            if better {
                self.best = Some((score, h));
            }
            return;
        }
        for (j, cand) in self.lattice.slot(i).iter().enumerate() {
            let (lm_score, state) = self.lm.sentence_logprob(&h.lm_state, &cand.tokens);
            let b = ScoreBreakdown::new(
                self.weights,
                cand.proposal_logprob,
                lm_score,
                self.channel_scores[i][j],
                cand.tokens.len(),
            );
            self.expansions += 1;
            self.visit(h.extend(j, b, state));
        }
    }
}

/// Independent per-slot argmax with the LM scoring every sentence from its
/// initial state; no stop term.
pub fn sent_rerank<L: LanguageModel, C: ChannelModel>(
    lattice: &Lattice,
    sentence_lm: &L,
    channel: &C,
    weights: &Weights,
) -> Result<DecodeResult> {
    weights.validate()?;
    let init = sentence_lm.initial_state();
    let mut best = Hypothesis::initial(init.clone());
    let mut stats = BeamStats::default();
    for (slot, src) in lattice.slots().iter().zip(&lattice.source.sentences) {
        let mut top: Option<(usize, ScoreBreakdown)> = None;
        for (j, cand) in slot.iter().enumerate() {
            let (b, _) = score_extension(weights, sentence_lm, channel, &init, src, cand);
            stats.expansions += 1;
            if top.is_none_or(|(_, t)| b.total > t.total) {
                top = Some((j, b));
            }
        }
        stats.pruned += slot.len() - 1;
        let (j, b) = top.expect("non-empty slot");
        best = best.extend(j, b, init.clone());
    }
    let score = best.cumulative;
    Ok(finish(lattice, best, None, score, stats))
}

/// Outcome of decoding a lattice and a copy whose first slot was replaced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub doc_id: String,
    /// Index of the probed slot (the second sentence).
    pub probe_slot: usize,
    pub base_choice: Sentence,
    pub altered_choice: Sentence,
    pub changed: bool,
}

/// Decodes `base` and a variant in which only the first slot (source sentence
/// and candidates) is replaced, and reports whether the choice for the second
/// sentence moved.
pub fn posterior_dependency_probe<L: LanguageModel, C: ChannelModel>(
    base: &Lattice,
    altered_source: Sentence,
    altered_candidates: Vec<Candidate>,
    lm: &L,
    channel: &C,
    weights: &Weights,
    beam: usize,
) -> Result<ProbeReport> {
    if base.len() < 2 {
        return Err(Error::invalid("probing needs a lattice with at least two slots"));
    }
    let mut source = base.source.clone();
    source.sentences[0] = altered_source;
    let mut slots: Vec<Vec<Candidate>> = base.slots().to_vec();
    slots[0] = altered_candidates;
    let altered = Lattice::new(source, slots)?;
    let a = doc_decode(base, lm, channel, weights, beam)?;
    let b = doc_decode(&altered, lm, channel, weights, beam)?;
    let base_choice = a.output.sentences[1].clone();
    let altered_choice = b.output.sentences[1].clone();
    Ok(ProbeReport {
        doc_id: base.doc_id.clone(),
        probe_slot: 1,
        changed: base_choice != altered_choice,
        base_choice,
        altered_choice,
    })
}
