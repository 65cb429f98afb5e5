//! Document language models.
//!
//! [`LanguageModel`] is the scorer interface used by the decoder: it scores a
//! whole sentence given an opaque document-prefix state and returns the
//! extended state. [`NGramLm`] is an interpolated Kneser-Ney model with a
//! fixed discount whose context window is *not* reset at sentence
//! boundaries, so n-grams spanning `</s>` carry information across sentences.
//!
//! Parameters are stored as a backoff model (log10 probabilities and backoff
//! weights), which is exactly the ARPA representation; scores returned by the
//! trait are natural logs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const STOP: &str = "</doc>";
pub const UNK: &str = "<unk>";

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_DISCOUNT: f64 = 0.75;
/// Weight of the uniform distribution mixed into every conditional.
pub const UNIFORM_FLOOR: f64 = 1e-10;

const FORMAT_VERSION: u32 = 1;
const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const STOP_ID: u32 = 2;
const UNK_ID: u32 = 3;
const NUM_MARKERS: u32 = 4;
/// log10 probability written for `<s>`, which is never predicted.
const BOS_LOG10: f64 = -99.0;

/// Scores sentences conditioned on a document prefix.
///
/// Implementations must be deterministic: the same `(state, sentence)` pair
/// always yields the same result.
pub trait LanguageModel: Send + Sync {
    type State: Clone + PartialEq + std::fmt::Debug + Send + Sync;

    /// State for the empty document prefix.
    fn initial_state(&self) -> Self::State;

    /// Natural-log probability of `sentence` followed by a sentence boundary.
    fn sentence_logprob(&self, state: &Self::State, sentence: &Sentence) -> (f64, Self::State);

    /// Natural-log probability that the document ends after `state`.
    fn stop_logprob(&self, state: &Self::State) -> f64;
}

impl<L: LanguageModel + ?Sized> LanguageModel for &L {
    type State = L::State;

    fn initial_state(&self) -> Self::State {
        (**self).initial_state()
    }

    fn sentence_logprob(&self, state: &Self::State, sentence: &Sentence) -> (f64, Self::State) {
        (**self).sentence_logprob(state, sentence)
    }

    fn stop_logprob(&self, state: &Self::State) -> f64 {
        (**self).stop_logprob(state)
    }
}

/// Wraps a model so every sentence is scored from the initial state.
///
/// This is the sentence-level LM used by the sentence reranker; its stop term
/// is a constant.
#[derive(Debug, Clone, Copy)]
pub struct SentenceLevel<L>(pub L);

impl<L: LanguageModel> LanguageModel for SentenceLevel<L> {
    type State = ();

    fn initial_state(&self) {}

    fn sentence_logprob(&self, _state: &(), sentence: &Sentence) -> (f64, ()) {
        let init = self.0.initial_state();
        (self.0.sentence_logprob(&init, sentence).0, ())
    }

    fn stop_logprob(&self, _state: &()) -> f64 {
        self.0.stop_logprob(&self.0.initial_state())
    }
}

/// The last `order - 1` token ids of the document prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NGramState(Vec<u32>);

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    log10_prob: f64,
    log10_backoff: f64,
}

/// Interpolated Kneser-Ney n-gram model.
#[derive(Clone, Debug)]
pub struct NGramLm {
    order: usize,
    discount: f64,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `grams[k - 1]` holds the k-grams.
    grams: Vec<HashMap<Vec<u32>, Entry>>,
}

/// Perplexity report; `convention` states which events were counted.
#[derive(Clone, Debug, Serialize)]
pub struct Perplexity {
    pub perplexity: f64,
    pub total_logprob: f64,
    pub scored_events: usize,
    pub words: usize,
    pub sentence_ends: usize,
    pub document_ends: usize,
    pub convention: &'static str,
}

pub const PERPLEXITY_CONVENTION: &str = "per word including one </s> per sentence and one </doc> per document";

/// `exp(-total / events)` over words plus sentence-end and document-end events.
pub fn perplexity_per_word<L: LanguageModel>(lm: &L, docs: &[Document]) -> Result<Perplexity> {
    if docs.is_empty() {
        return Err(Error::invalid("perplexity needs at least one document"));
    }
    let mut total = 0.0;
    let mut words = 0;
    let mut ends = 0;
    for doc in docs {
        let mut state = lm.initial_state();
        for s in &doc.sentences {
            let (lp, next) = lm.sentence_logprob(&state, s);
            total += lp;
            words += s.len();
            ends += 1;
            state = next;
        }
        total += lm.stop_logprob(&state);
    }
    let events = words + ends + docs.len();
    Ok(Perplexity {
        perplexity: (-total / events as f64).exp(),
        total_logprob: total,
        scored_events: events,
        words,
        sentence_ends: ends,
        document_ends: docs.len(),
        convention: PERPLEXITY_CONVENTION,
    })
}

impl NGramLm {
    /// Trains on documents, carrying context across sentence boundaries.
    pub fn train(docs: &[Document], order: usize, discount: f64) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot train a language model on an empty corpus"));
        }
        if order < 1 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!("discount {discount} is not in (0, 1)")));
        }

        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for s in &doc.sentences {
                for t in s.iter() {
                    if [BOS, EOS, STOP, UNK].contains(&t) {
                        return Err(Error::invalid(format!(
                            "training token {t} collides with a reserved marker"
                        )));
                    }
                    *counts.entry(t).or_default() += 1;
                }
            }
        }
        let mut words: Vec<&str> = counts.keys().copied().collect();
        words.sort_unstable();
        let singletons = counts.values().filter(|&&c| c == 1).count() as u64;

        let mut vocab: Vec<String> = [BOS, EOS, STOP, UNK].iter().map(|s| s.to_string()).collect();
        vocab.extend(words.iter().map(|w| w.to_string()));
        let index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();

        // raw counts; grams shorter than `order` only arise at document start
        let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        for doc in docs {
            let stream = doc_stream(doc, |t| index[t]);
            for i in 1..stream.len() {
                let start = i.saturating_sub(order - 1);
                let gram = stream[start..=i].to_vec();
                *raw[gram.len() - 1].entry(gram).or_default() += 1;
            }
        }

        // Kneser-Ney adjusted counts: continuation counts for lower orders,
        // except grams anchored at <s>, which have no left extension.
        let mut adjusted = raw;
        for k in (2..=order).rev() {
            let suffixes: Vec<Vec<u32>> = adjusted[k - 1].keys().map(|g| g[1..].to_vec()).collect();
            for suffix in suffixes {
                debug_assert!(suffix[0] != BOS_ID);
                *adjusted[k - 2].entry(suffix).or_default() += 1;
            }
        }
        if singletons > 0 {
            *adjusted[0].entry(vec![UNK_ID]).or_default() += singletons;
        }

        let vocab_size = vocab.len() - 1; // <s> is never predicted
        let mut lm = NGramLm {
            order,
            discount,
            vocab,
            index,
            grams: vec![HashMap::new(); order],
        };

        // unigrams: interpolate with the uniform distribution
        let total: u64 = adjusted[0].values().sum();
        let types = adjusted[0].len() as f64;
        let gamma = discount * types / total as f64;
        for id in 0..lm.vocab.len() as u32 {
            let log10_prob = if id == BOS_ID {
                BOS_LOG10
            } else {
                let c = adjusted[0].get(&vec![id]).copied().unwrap_or(0) as f64;
                let p = (c - discount).max(0.0) / total as f64 + gamma / vocab_size as f64;
                p.log10()
            };
            lm.grams[0].insert(
                vec![id],
                Entry {
                    log10_prob,
                    log10_backoff: 0.0,
                },
            );
        }

        for k in 2..=order {
            let mut by_context: BTreeMap<Vec<u32>, Vec<(u32, u64)>> = BTreeMap::new();
            for (gram, &c) in &adjusted[k - 1] {
                by_context
                    .entry(gram[..k - 1].to_vec())
                    .or_default()
                    .push((gram[k - 1], c));
            }
            for (context, followers) in by_context {
                let ctx_total: u64 = followers.iter().map(|&(_, c)| c).sum();
                let gamma = discount * followers.len() as f64 / ctx_total as f64;
                let mut level = HashMap::with_capacity(followers.len());
                for (w, c) in followers {
                    let lower = 10f64.powf(lm.backoff_log10(&context[1..], w));
                    let p = (c as f64 - discount) / ctx_total as f64 + gamma * lower;
                    let mut gram = context.clone();
                    gram.push(w);
                    level.insert(
                        gram,
                        Entry {
                            log10_prob: p.log10(),
                            log10_backoff: 0.0,
                        },
                    );
                }
                lm.grams[k - 1].extend(level);
                let ctx_entry = lm.grams[k - 2]
                    .get_mut(&context)
                    .expect("every context is itself a lower-order n-gram");
                ctx_entry.log10_backoff = gamma.log10();
            }
        }
        Ok(lm)
    }

    /// Trains a sentence-level model: every sentence is its own stream.
    pub fn train_sentences(docs: &[Document], order: usize, discount: f64) -> Result<Self> {
        let split: Vec<Document> = docs
            .iter()
            .flat_map(|d| {
                d.sentences.iter().map(|s| Document {
                    id: String::new(),
                    sentences: vec![s.clone()],
                })
            })
            .collect();
        Self::train(&split, order, discount)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Number of predictable symbols (everything except `<s>`).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// All predictable symbols, including `</s>`, `</doc>` and `<unk>`.
    pub fn predictable_symbols(&self) -> impl Iterator<Item = &str> {
        self.vocab[1..].iter().map(String::as_str)
    }

    pub fn ngram_counts(&self) -> Vec<usize> {
        self.grams.iter().map(HashMap::len).collect()
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Backoff-model log10 probability of `w` after `context`, without floor.
    fn backoff_log10(&self, context: &[u32], w: u32) -> f64 {
        let mut acc = 0.0;
        for start in 0..=context.len() {
            let h = &context[start..];
            let mut gram = Vec::with_capacity(h.len() + 1);
            gram.extend_from_slice(h);
            gram.push(w);
            if let Some(e) = self.grams[gram.len() - 1].get(&gram) {
                return acc + e.log10_prob;
            }
            if !h.is_empty() {
                if let Some(e) = self.grams[h.len() - 1].get(h) {
                    acc += e.log10_backoff;
                }
            }
        }
        unreachable!("every predictable id has a unigram entry")
    }

    fn prob_id(&self, context: &[u32], w: u32) -> f64 {
        let p = 10f64.powf(self.backoff_log10(context, w));
        (1.0 - UNIFORM_FLOOR) * p + UNIFORM_FLOOR / self.vocab_size() as f64
    }

    /// Conditional probability of `token` after the given context tokens.
    /// Only the last `order - 1` context tokens are used; unknown tokens
    /// map to `<unk>`. Marker strings (`<s>`, `</s>`, ...) are accepted.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let ids: Vec<u32> = context.iter().map(|t| self.id(t)).collect();
        let keep = ids.len().min(self.order - 1);
        self.prob_id(&ids[ids.len() - keep..], self.id(token))
    }

    fn push(&self, ctx: &mut Vec<u32>, id: u32) {
        if self.order == 1 {
            return;
        }
        ctx.push(id);
        if ctx.len() > self.order - 1 {
            ctx.remove(0);
        }
    }

    /// Context tokens held by a state, oldest first.
    pub fn state_tokens(&self, state: &NGramState) -> Vec<&str> {
        state.0.iter().map(|&i| self.vocab[i as usize].as_str()).collect()
    }

    /// Builds a state from explicit context tokens (last `order - 1` kept).
    pub fn state_from_tokens(&self, tokens: &[&str]) -> NGramState {
        let mut ctx = Vec::new();
        for t in tokens {
            self.push(&mut ctx, self.id(t));
        }
        NGramState(ctx)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_arpa()).map_err(|e| Error::io(path, e))?;
        let header = header_path(path);
        fs::write(&header, self.header_text()).map_err(|e| Error::io(header, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let header_file = header_path(path);
        let header = fs::read_to_string(&header_file).map_err(|e| Error::io(&header_file, e))?;
        let arpa = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&header, &arpa)
    }

    fn header_text(&self) -> String {
        format!(
            "# doc-reranker n-gram header\nversion={FORMAT_VERSION}\norder={}\ndiscount={}\nfloor={UNIFORM_FLOOR}\nbos={BOS}\neos={EOS}\nstop={STOP}\nunk={UNK}\n",
            self.order, self.discount
        )
    }

    /// ARPA text with log10 probabilities and backoffs; n-grams sorted by id.
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for (k, level) in self.grams.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, level.len());
        }
        for (k, level) in self.grams.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            let mut entries: Vec<(&Vec<u32>, &Entry)> = level.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
            for (gram, e) in entries {
                let words: Vec<&str> = gram.iter().map(|&i| self.vocab[i as usize].as_str()).collect();
                let _ = write!(out, "{}\t{}", e.log10_prob, words.join(" "));
                if k + 1 < self.order {
                    let _ = write!(out, "\t{}", e.log10_backoff);
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    /// Parses a header sidecar and an ARPA body.
    pub fn from_text(header: &str, arpa: &str) -> Result<Self> {
        let mut fields = HashMap::new();
        for line in header.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedModel(format!("header line {line:?}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::MalformedModel(format!("header lacks {k}")))
        };
        let version: u32 = get("version")?
            .parse()
            .map_err(|_| Error::MalformedModel("bad version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::MalformedModel(format!(
                "unsupported version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let order: usize = get("order")?
            .parse()
            .map_err(|_| Error::MalformedModel("bad order".into()))?;
        let discount: f64 = get("discount")?
            .parse()
            .map_err(|_| Error::MalformedModel("bad discount".into()))?;
        if order < 1 {
            return Err(Error::MalformedModel("order must be at least 1".into()));
        }
        let markers = [get("bos")?, get("eos")?, get("stop")?, get("unk")?];
        if markers != [BOS, EOS, STOP, UNK] {
            return Err(Error::MalformedModel(format!("unexpected marker tokens {markers:?}")));
        }

        let mut lines = arpa.lines().map(str::trim).enumerate().peekable();
        let mut expect = |want: &str| -> Result<()> {
            loop {
                match lines.next() {
                    Some((_, "")) => continue,
                    Some((_, l)) if l == want => return Ok(()),
                    Some((n, l)) => {
                        return Err(Error::MalformedModel(format!(
                            "line {}: expected {want:?}, found {l:?}",
                            n + 1
                        )))
                    }
                    None => return Err(Error::MalformedModel(format!("truncated before {want:?}"))),
                }
            }
        };
        expect("\\data\\")?;

        let mut declared = Vec::new();
        for k in 1..=order {
            let (n, line) = next_nonblank(&mut lines)?;
            let count = line
                .strip_prefix(&format!("ngram {k}="))
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| Error::MalformedModel(format!("line {}: bad ngram count {line:?}", n + 1)))?;
            declared.push(count);
        }

        let mut vocab: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut grams: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); order];
        for k in 1..=order {
            let (n, line) = next_nonblank(&mut lines)?;
            if line != format!("\\{k}-grams:") {
                return Err(Error::MalformedModel(format!(
                    "line {}: expected {k}-gram section",
                    n + 1
                )));
            }
            for _ in 0..declared[k - 1] {
                let (n, line) = next_nonblank(&mut lines)?;
                let bad = || Error::MalformedModel(format!("line {}: malformed n-gram {line:?}", n + 1));
                let mut parts = line.split('\t');
                let log10_prob: f64 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
                let words: Vec<&str> = parts.next().ok_or_else(bad)?.split(' ').collect();
                let log10_backoff: f64 = match parts.next() {
                    Some(b) if k < order => b.parse().map_err(|_| bad())?,
                    Some(_) => return Err(bad()),
                    None => 0.0,
                };
                if words.len() != k || !log10_prob.is_finite() || !log10_backoff.is_finite() {
                    return Err(bad());
                }
                let ids = if k == 1 {
                    if index.contains_key(words[0]) {
                        return Err(bad());
                    }
                    let id = vocab.len() as u32;
                    vocab.push(words[0].to_string());
                    index.insert(words[0].to_string(), id);
                    vec![id]
                } else {
                    words
                        .iter()
                        .map(|w| index.get(*w).copied().ok_or_else(bad))
                        .collect::<Result<Vec<u32>>>()?
                };
                grams[k - 1].insert(
                    ids,
                    Entry {
                        log10_prob,
                        log10_backoff,
                    },
                );
            }
            if k == 1 && (vocab.len() < NUM_MARKERS as usize || vocab[..4] != [BOS, EOS, STOP, UNK]) {
                return Err(Error::MalformedModel(
                    "unigram section must start with the marker tokens".into(),
                ));
            }
        }
        let (n, line) = next_nonblank(&mut lines)?;
        if line != "\\end\\" {
            return Err(Error::MalformedModel(format!("line {}: expected \\end\\", n + 1)));
        }
        Ok(NGramLm {
            order,
            discount,
            vocab,
            index,
            grams,
        })
    }
}

fn next_nonblank<'a, I: Iterator<Item = (usize, &'a str)>>(lines: &mut I) -> Result<(usize, &'a str)> {
    lines
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::MalformedModel("unexpected end of file".into()))
}

/// Sidecar header path: `<path>.meta`.
pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// `<s> s1 </s> s2 </s> ... sN </s> </doc>` as ids.
fn doc_stream<'a>(doc: &'a Document, mut id: impl FnMut(&'a str) -> u32) -> Vec<u32> {
    let mut stream = vec![BOS_ID];
    for s in &doc.sentences {
        stream.extend(s.iter().map(&mut id));
        stream.push(EOS_ID);
    }
    stream.push(STOP_ID);
    stream
}

impl LanguageModel for NGramLm {
    type State = NGramState;

    fn initial_state(&self) -> NGramState {
        let mut ctx = Vec::new();
        self.push(&mut ctx, BOS_ID);
        NGramState(ctx)
    }

    fn sentence_logprob(&self, state: &NGramState, sentence: &Sentence) -> (f64, NGramState) {
        let mut ctx = state.0.clone();
        let mut total = 0.0;
        for id in sentence.iter().map(|t| self.id(t)).chain(std::iter::once(EOS_ID)) {
            total += self.prob_id(&ctx, id).ln();
            self.push(&mut ctx, id);
        }
        (total, NGramState(ctx))
    }

    fn stop_logprob(&self, state: &NGramState) -> f64 {
        self.prob_id(&state.0, STOP_ID).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(lines: &[&str]) -> Document {
        Document::from_lines("d", lines).unwrap()
    }

    fn total_mass(lm: &NGramLm, ctx: &[&str]) -> f64 {
        lm.predictable_symbols().map(|w| lm.prob(ctx, w)).sum()
    }

    #[test]
    fn unigram_single_token_corpus_is_normalized() {
        let lm = NGramLm::train(&[doc(&["a"])], 1, 0.75).unwrap();
        assert_eq!(lm.vocab_size(), 4);
        let sum = lm.prob(&[], "a") + lm.prob(&[], EOS) + lm.prob(&[], STOP) + lm.prob(&[], UNK);
        assert!((sum - 1.0).abs() < 1e-12, "{sum}");
    }

    #[test]
    fn order_zero_rejected() {
        assert!(NGramLm::train(&[doc(&["a"])], 0, 0.75).is_err());
        assert!(NGramLm::train(&[], 2, 0.75).is_err());
        assert!(NGramLm::train(&[doc(&["a"])], 2, 1.5).is_err());
    }

    #[test]
    fn reserved_tokens_rejected() {
        assert!(NGramLm::train(&[doc(&["a </s>"])], 2, 0.75).is_err());
    }

    // Hand-derived interpolated Kneser-Ney on the document ["a b", "a b"]:
    // stream <s> a b </s> a b </s> </doc>.
    // bigram counts: <s> a:1, a b:2, b </s>:2, </s> a:1, </s> </doc>:1
    // unigram continuation counts: a:2 (<s>, </s>), b:1, </s>:1, </doc>:1; total 5, 4 types
    // uniform over V=5 (a b </s> </doc> <unk>); gamma0 = 0.75*4/5 = 0.6
    // p1(a) = 1.25/5 + 0.6/5 = 0.37, p1(b) = p1(</s>) = p1(</doc>) = 0.05 + 0.12 = 0.17, p1(<unk>) = 0.12
    // context a: c=2, one type -> gamma = 0.375; p(b|a) = 1.25/2 + 0.375*0.17 = 0.68875
    // p(a|<s>) = 0.25 + 0.75*0.37 = 0.5275
    // p(</s>|b) = 0.68875
    // context </s>: c=2, two types -> gamma = 0.75
    //   p(</doc>|</s>) = 0.25/2 + 0.75*0.17 = 0.2525
    fn floored(p: f64) -> f64 {
        (1.0 - UNIFORM_FLOOR) * p + UNIFORM_FLOOR / 5.0
    }

    #[test]
    fn bigram_hand_derived_values() {
        let lm = NGramLm::train(&[doc(&["a b", "a b"])], 2, 0.75).unwrap();
        assert!((lm.prob(&["a"], "b") - floored(0.68875)).abs() < 1e-12);
        assert!((lm.prob(&[BOS], "a") - floored(0.5275)).abs() < 1e-12);
        assert!((lm.prob(&[], "a") - floored(0.37)).abs() < 1e-12);
        for w in lm.predictable_symbols().filter(|w| *w != "b") {
            assert!(lm.prob(&["a"], w) < lm.prob(&["a"], "b"));
        }
        let s = Sentence::parse("a b").unwrap();
        let (lp, next) = lm.sentence_logprob(&lm.initial_state(), &s);
        let expected = floored(0.5275).ln() + floored(0.68875).ln() + floored(0.68875).ln();
        assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");
        let stop = lm.stop_logprob(&next);
        assert!((stop - floored(0.2525).ln()).abs() < 1e-12);
    }

    #[test]
    fn contexts_sum_to_one() {
        let docs = vec![doc(&["a b c", "c a", "b b a"]), doc(&["x a", "a b c d"])];
        for order in 1..=4 {
            let lm = NGramLm::train(&docs, order, 0.75).unwrap();
            for ctx in [
                vec![],
                vec![BOS],
                vec!["a", "b"],
                vec!["c", EOS, "a"],
                vec!["zz", "q", "a"],
                vec![EOS, "x"],
            ] {
                let sum = total_mass(&lm, &ctx);
                assert!((sum - 1.0).abs() < 1e-9, "order {order} ctx {ctx:?}: {sum}");
            }
        }
    }

    #[test]
    fn unigram_ignores_state() {
        let lm = NGramLm::train(&[doc(&["a b", "b c"])], 1, 0.75).unwrap();
        let s = Sentence::parse("a c").unwrap();
        let (lp0, st) = lm.sentence_logprob(&lm.initial_state(), &s);
        let (lp1, _) = lm.sentence_logprob(&st, &s);
        assert_eq!(lp0, lp1);
        assert_eq!(lm.stop_logprob(&st), lm.stop_logprob(&lm.initial_state()));
        let expected = lm.prob(&[], "a").ln() + lm.prob(&[], "c").ln() + lm.prob(&[], EOS).ln();
        assert!((lp0 - expected).abs() < 1e-12);
    }

    #[test]
    fn unknown_tokens_score_as_unk() {
        let lm = NGramLm::train(&[doc(&["a b", "a b c"])], 2, 0.75).unwrap();
        assert!(lm.prob(&[], UNK) > 0.0);
        assert_eq!(lm.prob(&["a"], "never-seen"), lm.prob(&["a"], UNK));
    }

    #[test]
    fn arpa_round_trip_is_byte_identical() {
        let lm = NGramLm::train(&[doc(&["a b c", "c a"]), doc(&["b a"])], 3, 0.75).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("lm.arpa");
        let p2 = dir.path().join("lm2.arpa");
        lm.save(&p1).unwrap();
        let loaded = NGramLm::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(fs::read(header_path(&p1)).unwrap(), fs::read(header_path(&p2)).unwrap());
        let s = Sentence::parse("c a b").unwrap();
        let a = lm.sentence_logprob(&lm.initial_state(), &s);
        let b = loaded.sentence_logprob(&loaded.initial_state(), &s);
        assert!((a.0 - b.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_arpa_rejected() {
        let lm = NGramLm::train(&[doc(&["a b c", "c a"])], 2, 0.75).unwrap();
        let arpa = lm.to_arpa();
        let header = lm.header_text();
        let cut = &arpa[..arpa.len() * 2 / 3];
        assert!(matches!(
            NGramLm::from_text(&header, cut),
            Err(Error::MalformedModel(_))
        ));
        let bad_version = header.replace("version=1", "version=7");
        assert!(matches!(
            NGramLm::from_text(&bad_version, &arpa),
            Err(Error::MalformedModel(_))
        ));
        assert!(NGramLm::from_text(&header, &arpa).is_ok());
    }

    #[test]
    fn sentence_level_wrapper_resets_context() {
        let lm = NGramLm::train(&[doc(&["a b", "c d"])], 3, 0.75).unwrap();
        let sent = SentenceLevel(&lm);
        let s = Sentence::parse("c d").unwrap();
        let direct = lm.sentence_logprob(&lm.initial_state(), &s).0;
        assert_eq!(sent.sentence_logprob(&(), &s).0, direct);
    }
}
