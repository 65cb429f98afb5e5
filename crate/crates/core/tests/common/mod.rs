//! Scorers and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use doc_reranker::channel::{ChannelModel, Ibm1Model, NULL_TOKEN};
use doc_reranker::lm::{LanguageModel, NGramLm, BOS, EOS, STOP};
use doc_reranker::proposal::{Candidate, Lattice};
use doc_reranker::{Document, Sentence};
use rand::Rng;

fn hashed(parts: impl Hash) -> f64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    // uniform in (-10, 0]
    -10.0 * ((h.finish() >> 11) as f64 / (1u64 << 53) as f64)
}

/// An LM whose score depends on the previous sentence and the current one
/// through a hash, so it has genuine context dependence but no structure.
pub struct HashLm {
    pub salt: u64,
}

impl LanguageModel for HashLm {
    type State = u64;

    fn initial_state(&self) -> u64 {
        self.salt
    }

    fn sentence_logprob(&self, state: &u64, sentence: &Sentence) -> (f64, u64) {
        let text = sentence.to_string();
        let mut h = DefaultHasher::new();
        (self.salt, &text).hash(&mut h);
        (hashed((self.salt, *state, &text)), h.finish())
    }

    fn stop_logprob(&self, state: &u64) -> f64 {
        hashed((self.salt, *state, "</doc>"))
    }
}

pub struct HashChannel {
    pub salt: u64,
}

impl ChannelModel for HashChannel {
    fn channel_logprob(&self, source: &Sentence, target: &Sentence) -> f64 {
        hashed((self.salt, source.to_string(), target.to_string()))
    }
}

/// Context-free lookup scorers keyed by sentence text.
pub struct TableLm(pub HashMap<String, f64>);

impl LanguageModel for TableLm {
    type State = ();

    fn initial_state(&self) {}

    fn sentence_logprob(&self, _: &(), sentence: &Sentence) -> (f64, ()) {
        (self.0[&sentence.to_string()], ())
    }

    fn stop_logprob(&self, _: &()) -> f64 {
        0.0
    }
}

pub struct TableChannel(pub HashMap<String, f64>);

impl ChannelModel for TableChannel {
    fn channel_logprob(&self, _source: &Sentence, target: &Sentence) -> f64 {
        self.0[&target.to_string()]
    }
}

pub fn sent(text: &str) -> Sentence {
    Sentence::parse(text).unwrap()
}

/// A random lattice with `len` slots of 1..=k distinct candidates.
pub fn random_lattice(rng: &mut impl Rng, id: &str, k: usize, len: usize) -> Lattice {
    let words = ["a", "b", "c", "d", "e", "f", "g"];
    let mut source = Vec::new();
    let mut slots = Vec::new();
    for i in 0..len {
        source.push(sent(&format!("x{i} y{}", rng.gen_range(0..5))));
        let n = rng.gen_range(1..=k);
        let mut slot: Vec<Candidate> = Vec::new();
        while slot.len() < n {
            let l = rng.gen_range(1..=4);
            let text: Vec<&str> = (0..l).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let s = sent(&text.join(" "));
            if slot.iter().all(|c| c.tokens != s) {
                slot.push(Candidate::new(s, -rng.gen_range(0.0..5.0), "e0"));
            }
        }
        slots.push(slot);
    }
    Lattice::new(Document::new(id, source).unwrap(), slots).unwrap()
}

/// Document log-probability by walking the flat token stream
/// `<s> y1 </s> y2 </s> ... </doc>` through explicit n-gram lookups.
pub fn stream_logprob(lm: &NGramLm, sentences: &[&Sentence]) -> f64 {
    let mut stream: Vec<String> = vec![BOS.to_string()];
    let mut total = 0.0;
    let mut emit = |stream: &mut Vec<String>, tok: &str| {
        let ctx: Vec<&str> = stream.iter().map(String::as_str).collect();
        total += lm.prob(&ctx, tok).ln();
        stream.push(tok.to_string());
    };
    for s in sentences {
        for t in s.iter() {
            emit(&mut stream, t);
        }
        emit(&mut stream, EOS);
    }
    emit(&mut stream, STOP);
    total
}

/// IBM Model 1 log p(x | y) from table lookups.
pub fn ibm1_logprob(model: &Ibm1Model, source: &Sentence, target: &Sentence) -> f64 {
    let n = target.len() as f64;
    let mut total = 0.0;
    for x in source.iter() {
        let mut mass = model.prob(x, NULL_TOKEN);
        for y in target.iter() {
            mass += model.prob(x, y);
        }
        total += mass.max(1e-10).ln();
    }
    total - source.len() as f64 * (n + 1.0).ln()
}

/// Every index vector of the lattice in lexicographic order.
pub fn all_paths(lattice: &Lattice) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for slot in lattice.slots() {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..slot.len()).map(move |j| {
                    let mut q = p.clone();
                    q.push(j);
                    q
                })
            })
            .collect();
    }
    out
}
