//! Candidate translations per source sentence.
//!
//! A [`Lattice`] holds, for every sentence of a source document, a slot of
//! deduplicated candidates ordered by descending proposal log-probability.
//! Lattices come from external n-best files ([`load_nbest`]), from the toy
//! dictionary proposer ([`ToyProposer`]) or from merging several experts'
//! pools ([`merge_expert_pools`]).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};

pub const DEFAULT_EXPERT: &str = "e0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: Sentence,
    pub proposal_logprob: f64,
    pub expert_id: String,
}

impl Candidate {
    pub fn new(tokens: Sentence, proposal_logprob: f64, expert_id: impl Into<String>) -> Self {
        Candidate {
            tokens,
            proposal_logprob,
            expert_id: expert_id.into(),
        }
    }
}

/// Slot order: descending log-probability, then ascending expert id.
fn slot_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.proposal_logprob
        .total_cmp(&a.proposal_logprob)
        .then_with(|| a.expert_id.cmp(&b.expert_id))
}

/// Removes duplicate token sequences, keeping the highest log-probability
/// (ties: lowest expert id, then earliest), and sorts the slot.
pub fn dedup_and_sort(candidates: Vec<Candidate>) -> Vec<Candidate> {
    let mut best: HashMap<Sentence, usize> = HashMap::new();
    let mut kept: Vec<Option<Candidate>> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match best.get(&c.tokens) {
            Some(&i) => {
                let prev = kept[i].as_ref().expect("kept slot");
                if slot_order(&c, prev) == Ordering::Less {
                    kept[i] = Some(c);
                }
            }
            None => {
                best.insert(c.tokens.clone(), kept.len());
                kept.push(Some(c));
            }
        }
    }
    let mut out: Vec<Candidate> = kept.into_iter().flatten().collect();
    // stable: equal keys keep first-seen order
    out.sort_by(slot_order);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub doc_id: String,
    pub source: Document,
    slots: Vec<Vec<Candidate>>,
}

impl Lattice {
    /// Validates slot count and emptiness; deduplicates and sorts each slot.
    pub fn new(source: Document, slots: Vec<Vec<Candidate>>) -> Result<Self> {
        if slots.len() != source.len() {
            return Err(Error::CountMismatch(format!(
                "document {} has {} sentences but {} candidate slots",
                source.id,
                source.len(),
                slots.len()
            )));
        }
        let mut clean = Vec::with_capacity(slots.len());
        for (i, slot) in slots.into_iter().enumerate() {
            if slot.is_empty() {
                return Err(Error::invalid(format!(
                    "document {} slot {i} has no candidates",
                    source.id
                )));
            }
            if let Some(c) = slot.iter().find(|c| !c.proposal_logprob.is_finite()) {
                return Err(Error::invalid(format!(
                    "document {} slot {i}: non-finite log-probability {}",
                    source.id, c.proposal_logprob
                )));
            }
            clean.push(dedup_and_sort(slot));
        }
        Ok(Lattice {
            doc_id: source.id.clone(),
            source,
            slots: clean,
        })
    }

    pub fn slots(&self) -> &[Vec<Candidate>] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> &[Candidate] {
        &self.slots[i]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot_sizes(&self) -> Vec<usize> {
        self.slots.iter().map(Vec::len).collect()
    }

    /// Keeps at most `k` best candidates per slot.
    pub fn truncated(&self, k: usize) -> Lattice {
        let mut out = self.clone();
        for slot in &mut out.slots {
            slot.truncate(k.max(1));
        }
        out
    }

    /// Number of complete paths through the lattice (as a float; may be huge).
    pub fn path_count(&self) -> f64 {
        self.slots.iter().map(|s| s.len() as f64).product()
    }

    /// Adds `reference` sentences to the pools with the given log-probability
    /// and expert id; returns the new lattice.
    pub fn with_references(&self, reference: &Document, logprob: f64, expert_id: &str) -> Result<Lattice> {
        if reference.len() != self.len() {
            return Err(Error::CountMismatch(format!(
                "reference {} has {} sentences, lattice {} has {}",
                reference.id,
                reference.len(),
                self.doc_id,
                self.len()
            )));
        }
        let slots = self
            .slots
            .iter()
            .zip(&reference.sentences)
            .map(|(slot, r)| {
                let mut s = slot.clone();
                s.push(Candidate::new(r.clone(), logprob, expert_id));
                s
            })
            .collect();
        Lattice::new(self.source.clone(), slots)
    }

    /// Per slot, which candidates equal the corresponding sentence of any
    /// of the given references.
    pub fn reference_marks(&self, references: &[&Document]) -> Vec<Vec<bool>> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.iter()
                    .map(|c| references.iter().any(|r| r.sentences.get(i) == Some(&c.tokens)))
                    .collect()
            })
            .collect()
    }
}

/// One line of an n-best file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NBestRecord {
    pub doc_id: String,
    pub sent_index: usize,
    pub tokens: String,
    pub logprob: f64,
    #[serde(default = "default_expert")]
    pub expert_id: String,
}

fn default_expert() -> String {
    DEFAULT_EXPERT.to_string()
}

pub fn load_nbest(path: impl AsRef<Path>, source_docs: &[Document]) -> Result<Vec<Lattice>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_nbest(BufReader::new(file), source_docs, &path.display().to_string())
}

/// Groups n-best records into one lattice per source document, in source order.
pub fn read_nbest<R: BufRead>(reader: R, source_docs: &[Document], context: &str) -> Result<Vec<Lattice>> {
    let by_id: HashMap<&str, usize> = source_docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect();
    let mut slots: Vec<Vec<Vec<Candidate>>> = source_docs.iter().map(|d| vec![Vec::new(); d.len()]).collect();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(context, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NBestRecord = serde_json::from_str(&line).map_err(|e| Error::parse(context, n + 1, e.to_string()))?;
        let &d = by_id
            .get(rec.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(rec.doc_id.clone()))?;
        if rec.sent_index >= slots[d].len() {
            return Err(Error::parse(
                context,
                n + 1,
                format!(
                    "sent_index {} out of range for {} ({} sentences)",
                    rec.sent_index,
                    rec.doc_id,
                    slots[d].len()
                ),
            ));
        }
        if !rec.logprob.is_finite() {
            return Err(Error::parse(context, n + 1, "non-finite logprob"));
        }
        let tokens = Sentence::parse(&rec.tokens).map_err(|_| Error::parse(context, n + 1, "empty candidate"))?;
        slots[d][rec.sent_index].push(Candidate::new(tokens, rec.logprob, rec.expert_id));
    }
    source_docs
        .iter()
        .zip(slots)
        .map(|(doc, s)| Lattice::new(doc.clone(), s))
        .collect()
}

pub fn write_nbest<W: Write>(mut out: W, lattices: &[Lattice]) -> std::io::Result<()> {
    for lat in lattices {
        for (i, slot) in lat.slots().iter().enumerate() {
            for c in slot {
                let rec = NBestRecord {
                    doc_id: lat.doc_id.clone(),
                    sent_index: i,
                    tokens: c.tokens.to_string(),
                    logprob: c.proposal_logprob,
                    expert_id: c.expert_id.clone(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

pub fn save_nbest(path: impl AsRef<Path>, lattices: &[Lattice]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_nbest(&mut out, lattices).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Source token → weighted target realizations. A realization may be
/// several space-separated tokens, or empty to delete the source token.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Dictionary {
    entries: BTreeMap<String, Vec<(String, f64)>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>, prob: f64) {
        self.entries
            .entry(source.into())
            .or_default()
            .push((target.into(), prob));
    }

    pub fn get(&self, source: &str) -> Option<&[(String, f64)]> {
        self.entries.get(source).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// K-best token-by-token translation under a [`Dictionary`].
///
/// With `noise_scale > 0` each dictionary option's log-probability is
/// shifted by a uniform draw in `[-noise_scale, noise_scale]` (seeded by
/// `noise_seed`), which makes differently seeded proposers behave like
/// distinct experts.
#[derive(Clone, Debug)]
pub struct ToyProposer {
    pub k: usize,
    pub noise_scale: f64,
    pub noise_seed: u64,
    pub expert_id: String,
}

impl Default for ToyProposer {
    fn default() -> Self {
        ToyProposer {
            k: crate::DEFAULT_NBEST,
            noise_scale: 0.0,
            noise_seed: 0,
            expert_id: DEFAULT_EXPERT.to_string(),
        }
    }
}

#[derive(Clone)]
struct Realization {
    tokens: Vec<String>,
    logprob: f64,
}

impl ToyProposer {
    fn options(&self, dictionary: &Dictionary) -> BTreeMap<String, Vec<Realization>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let mut out = BTreeMap::new();
        for (src, opts) in &dictionary.entries {
            let mut list: Vec<Realization> = opts
                .iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(t, p)| {
                    let noise = if self.noise_scale > 0.0 {
                        rng.gen_range(-self.noise_scale..=self.noise_scale)
                    } else {
                        0.0
                    };
                    Realization {
                        tokens: t.split_whitespace().map(str::to_string).collect(),
                        logprob: p.ln() + noise,
                    }
                })
                .collect();
            list.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then_with(|| a.tokens.cmp(&b.tokens)));
            out.insert(src.clone(), list);
        }
        out
    }

    pub fn propose(&self, source: &Document, dictionary: &Dictionary) -> Result<Lattice> {
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        let options = self.options(dictionary);
        let mut slots = Vec::with_capacity(source.len());
        for sentence in &source.sentences {
            // beam over the monotone lattice keeps the exact K best products
            let mut beam: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
            // unknown source tokens are copied through with probability one
            let per_token: Vec<Vec<Realization>> = sentence
                .iter()
                .map(|t| match options.get(t) {
                    Some(o) if !o.is_empty() => o.clone(),
                    _ => vec![Realization {
                        tokens: vec![t.to_string()],
                        logprob: 0.0,
                    }],
                })
                .collect();
            for opts in &per_token {
                let mut next: Vec<(Vec<usize>, f64)> = Vec::with_capacity(beam.len() * opts.len());
                for (path, lp) in &beam {
                    for (j, o) in opts.iter().enumerate() {
                        let mut p = path.clone();
                        p.push(j);
                        next.push((p, lp + o.logprob));
                    }
                }
                next.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                next.truncate(self.k);
                beam = next;
            }
            let slot: Vec<Candidate> = beam
                .into_iter()
                .filter_map(|(path, lp)| {
                    let tokens: Vec<&str> = path
                        .iter()
                        .zip(&per_token)
                        .flat_map(|(&j, opts)| opts[j].tokens.iter().map(String::as_str))
                        .collect();
                    Sentence::parse(&tokens.join(" "))
                        .ok()
                        .map(|s| Candidate::new(s, lp, self.expert_id.clone()))
                })
                .collect();
            if slot.is_empty() {
                return Err(Error::invalid(format!(
                    "document {}: every derivation of {sentence} is empty",
                    source.id
                )));
            }
            slots.push(slot);
        }
        Lattice::new(source.clone(), slots)
    }
}

/// [`ToyProposer`] without noise.
pub fn toy_propose(source: &Document, dictionary: &Dictionary, k: usize, noise_seed: u64) -> Result<Lattice> {
    ToyProposer {
        k,
        noise_seed,
        ..ToyProposer::default()
    }
    .propose(source, dictionary)
}

/// Unions the pools of several experts for one document and truncates each
/// slot to `k` by round-robin over experts in expert-id order.
pub fn merge_expert_pools(lattices: &[Lattice], k: usize) -> Result<Lattice> {
    let first = lattices.first().ok_or_else(|| Error::invalid("no lattices to merge"))?;
    if k < 1 {
        return Err(Error::invalid("K must be at least 1"));
    }
    for l in lattices {
        if l.doc_id != first.doc_id || l.len() != first.len() {
            return Err(Error::CountMismatch(format!(
                "cannot merge lattice {} ({} slots) with {} ({} slots)",
                l.doc_id,
                l.len(),
                first.doc_id,
                first.len()
            )));
        }
    }
    let mut slots = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let union: Vec<Candidate> = lattices.iter().flat_map(|l| l.slot(i).iter().cloned()).collect();
        let pool = dedup_and_sort(union);
        let mut by_expert: BTreeMap<String, std::collections::VecDeque<Candidate>> = BTreeMap::new();
        for c in pool {
            by_expert.entry(c.expert_id.clone()).or_default().push_back(c);
        }
        let mut chosen = Vec::with_capacity(k);
        'outer: loop {
            let mut progressed = false;
            for queue in by_expert.values_mut() {
                if chosen.len() == k {
                    break 'outer;
                }
                if let Some(c) = queue.pop_front() {
                    chosen.push(c);
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        slots.push(chosen);
    }
    Lattice::new(first.source.clone(), slots)
}
