//! Synthetic parallel documents with planted cross-sentence dependencies.
//!
//! Every document carries one phenomenon with a hidden binary value. Its
//! first sentence contains a disambiguating word for that value; later
//! sentences are, with probability `ambiguity_rate`, left without one, so
//! their ambiguous source head word can only be translated correctly by
//! looking back. A target sentence is laid out as
//!
//! ```text
//! [disambiguator] head content+ tail
//! ```
//!
//! and both head and tail realize the document's value, so a document LM of
//! order 3 sees the previous sentence's tail when predicting the next head.
//! The dropped-pronoun phenomenon has no source head at all.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Ibm1Model;
use crate::corpus::{Document, ParallelDocumentCorpus, Sentence};
use crate::error::{Error, Result};
use crate::eval::Annotation;
use crate::lm::{NGramLm, SentenceLevel, DEFAULT_DISCOUNT};
use crate::proposal::{Candidate, Dictionary, Lattice};

pub const SYNTH_EXPERT: &str = "synth";

/// Longest distance, in sentences, between a disambiguator and the
/// ambiguity it resolves.
pub const MAX_DISTANCE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phenomenon {
    Number,
    Tense,
    Lexical,
    Pronoun,
}

pub const PHENOMENA: [Phenomenon; 4] = [
    Phenomenon::Number,
    Phenomenon::Tense,
    Phenomenon::Lexical,
    Phenomenon::Pronoun,
];

struct Forms {
    prefix: &'static str,
    head: [&'static str; 2],
    tail: [&'static str; 2],
    disambiguator: [&'static str; 2],
    source_head: bool,
}

impl Phenomenon {
    fn forms(self) -> Forms {
        match self {
            Phenomenon::Number => Forms {
                prefix: "num",
                head: ["this", "these"],
                tail: ["it", "them"],
                disambiguator: ["one", "several"],
                source_head: true,
            },
            Phenomenon::Tense => Forms {
                prefix: "ten",
                head: ["does", "did"],
                tail: ["now", "then"],
                disambiguator: ["today", "yesterday"],
                source_head: true,
            },
            Phenomenon::Lexical => Forms {
                prefix: "lex",
                head: ["shore", "bank"],
                tail: ["edge", "branch"],
                disambiguator: ["river", "finance"],
                source_head: true,
            },
            Phenomenon::Pronoun => Forms {
                prefix: "pro",
                head: ["he", "she"],
                tail: ["his", "her"],
                disambiguator: ["john", "mary"],
                source_head: false,
            },
        }
    }
}

/// The other value's realization of a head or tail form.
pub fn counterpart(form: &str) -> Option<&'static str> {
    PHENOMENA.iter().find_map(|p| {
        let f = p.forms();
        [f.head, f.tail]
            .into_iter()
            .find_map(|pair| pair.iter().position(|&w| w == form).map(|v| pair[1 - v]))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenomenonMix {
    pub number: f64,
    pub tense: f64,
    pub lexical: f64,
    pub pronoun: f64,
}

impl Default for PhenomenonMix {
    fn default() -> Self {
        PhenomenonMix {
            number: 0.25,
            tense: 0.25,
            lexical: 0.25,
            pronoun: 0.25,
        }
    }
}

impl PhenomenonMix {
    fn fractions(&self) -> [f64; 4] {
        [self.number, self.tense, self.lexical, self.pronoun]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub sentences_per_doc: usize,
    /// Content words per language (`s0..` on the source side, `t0..` on the target side).
    pub content_vocab: usize,
    pub min_content: usize,
    pub max_content: usize,
    pub mix: PhenomenonMix,
    pub ambiguity_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_docs: 100,
            sentences_per_doc: 5,
            content_vocab: 30,
            min_content: 1,
            max_content: 3,
            mix: PhenomenonMix::default(),
            ambiguity_rate: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let f = self.mix.fractions();
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("phenomenon fractions must be non-negative and sum to 1"));
        }
        if self.num_docs < 1 || self.sentences_per_doc < 1 || self.min_content < 1 {
            return Err(Error::invalid(
                "document, sentence and content counts must be at least 1",
            ));
        }
        if self.min_content > self.max_content {
            return Err(Error::invalid("min_content exceeds max_content"));
        }
        if self.content_vocab < 2 {
            return Err(Error::invalid("content vocabulary needs at least 2 words"));
        }
        if !(0.0..=1.0).contains(&self.ambiguity_rate) {
            return Err(Error::invalid("ambiguity rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocInfo {
    pub phenomenon: Phenomenon,
    pub value: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub corpus: ParallelDocumentCorpus,
    pub annotations: Vec<Annotation>,
    pub info: Vec<DocInfo>,
}

impl SynthCorpus {
    pub fn annotations_for<'a>(&'a self, doc_id: &'a str) -> impl Iterator<Item = &'a Annotation> + 'a {
        self.annotations.iter().filter(move |a| a.doc_id == doc_id)
    }
}

fn sentence(tokens: &[String]) -> Sentence {
    Sentence::parse(&tokens.join(" ")).expect("generated sentences are non-empty")
}

fn generate_doc(cfg: &SynthConfig, index: usize, info: DocInfo) -> (Document, Document, Vec<Annotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let id = format!("synth{index:04}");
    let f = info.phenomenon.forms();
    let v = info.value;
    let mut src = Vec::with_capacity(cfg.sentences_per_doc);
    let mut tgt = Vec::with_capacity(cfg.sentences_per_doc);
    let mut annotations = Vec::new();
    let mut last_disambiguator = 0;
    for i in 0..cfg.sentences_per_doc {
        let ambiguous = i > 0 && i - last_disambiguator <= MAX_DISTANCE && rng.gen_bool(cfg.ambiguity_rate);
        let mut s: Vec<String> = Vec::new();
        let mut t: Vec<String> = Vec::new();
        if !ambiguous {
            last_disambiguator = i;
            s.push(format!("{}_d{v}", f.prefix));
            t.push(f.disambiguator[v].to_string());
        }
        if f.source_head {
            s.push(format!("{}_h", f.prefix));
        }
        let head_index = t.len();
        t.push(f.head[v].to_string());
        for _ in 0..rng.gen_range(cfg.min_content..=cfg.max_content) {
            let k = rng.gen_range(0..cfg.content_vocab);
            s.push(format!("s{k}"));
            t.push(format!("t{k}"));
        }
        s.push(format!("{}_t", f.prefix));
        t.push(f.tail[v].to_string());
        if ambiguous {
            annotations.push(Annotation {
                doc_id: id.clone(),
                sent_index: i,
                token_index: head_index,
                consistent_form: f.head[v].to_string(),
                inconsistent_form: f.head[1 - v].to_string(),
            });
        }
        src.push(sentence(&s));
        tgt.push(sentence(&t));
    }
    (
        Document {
            id: id.clone(),
            sentences: src,
        },
        Document { id, sentences: tgt },
        annotations,
    )
}

/// Generates `cfg.num_docs` parallel documents and one annotation per
/// ambiguous sentence (at the head position).
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let fractions = cfg.mix.fractions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = [0usize; 4];
    let info: Vec<DocInfo> = (0..cfg.num_docs)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut p = 3;
            for (j, f) in fractions.iter().enumerate() {
                acc += f;
                if u < acc && *f > 0.0 {
                    p = j;
                    break;
                }
            }
            // fall back to the last phenomenon with positive mass
            if fractions[p] == 0.0 {
                p = fractions.iter().rposition(|f| *f > 0.0).expect("fractions sum to 1");
            }
            let value = seen[p] % 2;
            seen[p] += 1;
            DocInfo {
                phenomenon: PHENOMENA[p],
                value,
            }
        })
        .collect();
    let generated: Vec<_> = info
        .par_iter()
        .enumerate()
        .map(|(i, &d)| generate_doc(cfg, i, d))
        .collect();
    let mut docs = Vec::with_capacity(generated.len());
    let mut annotations = Vec::new();
    for (s, t, a) in generated {
        docs.push((s, t));
        annotations.extend(a);
    }
    Ok(SynthCorpus {
        corpus: ParallelDocumentCorpus { docs },
        annotations,
        info,
    })
}

/// `sentence` with every head and tail form replaced by its counterpart.
pub fn inconsistent_variant(sentence: &Sentence) -> Sentence {
    let tokens: Vec<&str> = sentence.iter().map(|t| counterpart(t).unwrap_or(t)).collect();
    Sentence::parse(&tokens.join(" ")).expect("same length as the input")
}

fn content_index(token: &str) -> Option<usize> {
    token.strip_prefix('t').and_then(|n| n.parse().ok())
}

/// Builds a lattice for one synthetic document: per slot the reference, the
/// inconsistent variant for annotated sentences (near-tied with the
/// reference), and distractors that swap one content word, up to `k`
/// candidates. `content_vocab` bounds the replacement words.
pub fn make_ambiguous_lattice(
    source: &Document,
    reference: &Document,
    annotations: &[Annotation],
    k: usize,
    content_vocab: usize,
    seed: u64,
) -> Result<Lattice> {
    if k < 2 {
        return Err(Error::invalid("ambiguous lattices need K >= 2"));
    }
    if source.len() != reference.len() {
        return Err(Error::CountMismatch(format!(
            "document {}: {} source vs {} reference sentences",
            source.id,
            source.len(),
            reference.len()
        )));
    }
    let ambiguous: HashSet<usize> = annotations
        .iter()
        .filter(|a| a.doc_id == source.id)
        .map(|a| a.sent_index)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots = Vec::with_capacity(reference.len());
    for (i, r) in reference.sentences.iter().enumerate() {
        let base = -0.5 * r.len() as f64;
        let mut slot = Vec::with_capacity(k);
        let mut used: HashSet<Sentence> = HashSet::new();
        used.insert(r.clone());
        // distractors derive from either variant so they carry no hint
        let mut bases = vec![r.clone()];
        if ambiguous.contains(&i) {
            let v = inconsistent_variant(r);
            let jitter = if rng.gen_bool(0.5) { 1e-7 } else { -1e-7 };
            slot.push(Candidate::new(r.clone(), base + jitter, SYNTH_EXPERT));
            used.insert(v.clone());
            bases.push(v.clone());
            slot.push(Candidate::new(v, base - jitter, SYNTH_EXPERT));
        } else {
            slot.push(Candidate::new(r.clone(), base, SYNTH_EXPERT));
        }
        let positions: Vec<usize> = r
            .iter()
            .enumerate()
            .filter(|(_, t)| content_index(t).is_some())
            .map(|(p, _)| p)
            .collect();
        let mut attempts = 0;
        while slot.len() < k && !positions.is_empty() && attempts < 100 * k {
            attempts += 1;
            let p = *positions.choose(&mut rng).expect("non-empty");
            let from = bases.choose(&mut rng).expect("non-empty");
            let mut tokens: Vec<String> = from.iter().map(str::to_string).collect();
            tokens[p] = format!("t{}", rng.gen_range(0..content_vocab));
            let d = sentence(&tokens);
            if used.insert(d.clone()) {
                let lp = base + rng.gen_range(-1.5..0.5);
                slot.push(Candidate::new(d, lp, SYNTH_EXPERT));
            }
        }
        slots.push(slot);
    }
    Lattice::new(source.clone(), slots)
}

/// Ambiguous lattices for every document of `corpus`, seeded per document.
pub fn make_ambiguous_lattices(
    corpus: &SynthCorpus,
    k: usize,
    content_vocab: usize,
    seed: u64,
) -> Result<Vec<Lattice>> {
    corpus
        .corpus
        .docs
        .iter()
        .enumerate()
        .map(|(i, (s, t))| {
            make_ambiguous_lattice(s, t, &corpus.annotations, k, content_vocab, seed.wrapping_add(i as u64))
        })
        .collect()
}

/// A noisy bilingual dictionary for the synthetic language: every content
/// word prefers its own translation and has `alternatives` weaker
/// neighbours; ambiguous heads and tails split evenly between both values.
/// Dropped pronouns cannot be produced token by token.
pub fn toy_dictionary(content_vocab: usize, alternatives: usize) -> Dictionary {
    let mut d = Dictionary::new();
    for k in 0..content_vocab {
        let main = 0.6;
        d.insert(format!("s{k}"), format!("t{k}"), main);
        for a in 1..=alternatives {
            d.insert(
                format!("s{k}"),
                format!("t{}", (k + a) % content_vocab),
                (1.0 - main) / alternatives as f64,
            );
        }
    }
    for p in PHENOMENA {
        let f = p.forms();
        for v in 0..2 {
            d.insert(format!("{}_d{v}", f.prefix), f.disambiguator[v], 0.9);
            d.insert(format!("{}_d{v}", f.prefix), f.disambiguator[1 - v], 0.1);
            d.insert(format!("{}_t", f.prefix), f.tail[v], 0.5);
            if f.source_head {
                d.insert(format!("{}_h", f.prefix), f.head[v], 0.5);
            }
        }
    }
    d
}

/// A train/test pair of synthetic corpora with scorers trained on the
/// training side.
pub struct Benchmark {
    pub train: SynthCorpus,
    pub test: SynthCorpus,
    pub doc_lm: NGramLm,
    pub sent_lm: SentenceLevel<NGramLm>,
    pub channel: Ibm1Model,
}

impl Benchmark {
    pub fn build(train: &SynthConfig, test: &SynthConfig, lm_order: usize, em_iterations: usize) -> Result<Self> {
        let train = generate_corpus(train)?;
        let test = generate_corpus(test)?;
        let targets = train.corpus.targets();
        let doc_lm = NGramLm::train(&targets, lm_order, DEFAULT_DISCOUNT)?;
        let sent_lm = SentenceLevel(NGramLm::train_sentences(&targets, lm_order, DEFAULT_DISCOUNT)?);
        let (channel, _) = Ibm1Model::train(&train.corpus.sentence_pairs(), em_iterations)?;
        Ok(Benchmark {
            train,
            test,
            doc_lm,
            sent_lm,
            channel,
        })
    }
}

pub fn save_annotations(path: impl AsRef<Path>, annotations: &[Annotation]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for a in annotations {
        serde_json::to_writer(&mut out, a).map_err(|e| Error::io(path, e.into()))?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(&ctx, n + 1, e.to_string()))?);
    }
    Ok(out)
}
