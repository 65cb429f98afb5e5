//! Channel models `p(x | y)`: the probability of a source sentence given a
//! candidate target sentence.
//!
//! [`Ibm1Model`] is IBM Model 1 trained in the channel direction (target
//! words generate source words) with a NULL target word.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::Serialize;

use crate::corpus::{ParallelSentenceCorpus, Sentence};
use crate::error::{Error, Result};

pub const NULL_TOKEN: &str = "<NULL>";
/// Lower bound on the per-source-token alignment mass.
pub const UNSEEN_FLOOR: f64 = 1e-10;

const NULL_ID: u32 = 0;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Scores `log p(source | target)`.
pub trait ChannelModel: Send + Sync {
    fn channel_logprob(&self, source: &Sentence, target: &Sentence) -> f64;
}

impl<C: ChannelModel + ?Sized> ChannelModel for &C {
    fn channel_logprob(&self, source: &Sentence, target: &Sentence) -> f64 {
        (**self).channel_logprob(source, target)
    }
}

/// Translation table `t(source | target)`, normalized per target word.
#[derive(Clone, Debug, Default)]
pub struct Ibm1Model {
    source_vocab: Vec<String>,
    source_index: HashMap<String, u32>,
    /// id 0 is NULL
    target_vocab: Vec<String>,
    target_index: HashMap<String, u32>,
    ttable: HashMap<(u32, u32), f64>,
}

/// Per-iteration training log-likelihood (natural log, of the parameters
/// used in that iteration's E-step).
#[derive(Clone, Debug, Default, Serialize)]
pub struct TrainingLog {
    pub log_likelihood: Vec<f64>,
}

/// Targets whose distributions had to be renormalized on load.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LoadReport {
    pub renormalized_targets: Vec<String>,
}

fn intern(vocab: &mut Vec<String>, index: &mut HashMap<String, u32>, w: &str) -> u32 {
    if let Some(&id) = index.get(w) {
        return id;
    }
    let id = vocab.len() as u32;
    vocab.push(w.to_string());
    index.insert(w.to_string(), id);
    id
}

impl Ibm1Model {
    fn empty() -> Self {
        let mut m = Ibm1Model::default();
        intern(&mut m.target_vocab, &mut m.target_index, NULL_TOKEN);
        m
    }

    /// Runs `iterations` rounds of EM from a uniform start over co-occurring
    /// word pairs.
    pub fn train(corpus: &ParallelSentenceCorpus, iterations: usize) -> Result<(Self, TrainingLog)> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot train a channel model on an empty corpus"));
        }
        if iterations < 1 {
            return Err(Error::invalid("at least one EM iteration is required"));
        }
        let mut m = Ibm1Model::empty();
        let pairs: Vec<(Vec<u32>, Vec<u32>)> = corpus
            .pairs
            .iter()
            .map(|(src, tgt)| {
                let s = src
                    .iter()
                    .map(|w| intern(&mut m.source_vocab, &mut m.source_index, w))
                    .collect();
                let t = std::iter::once(NULL_ID)
                    .chain(tgt.iter().map(|w| intern(&mut m.target_vocab, &mut m.target_index, w)))
                    .collect();
                (s, t)
            })
            .collect();

        let mut cooc: HashMap<u32, Vec<u32>> = HashMap::new();
        {
            let mut seen = std::collections::HashSet::new();
            for (s, t) in &pairs {
                for &tw in t {
                    for &sw in s {
                        if seen.insert((sw, tw)) {
                            cooc.entry(tw).or_default().push(sw);
                        }
                    }
                }
            }
        }
        for (&tw, sources) in &cooc {
            let p = 1.0 / sources.len() as f64;
            for &sw in sources {
                m.ttable.insert((sw, tw), p);
            }
        }

        let mut log = TrainingLog::default();
        for _ in 0..iterations {
            let mut counts: HashMap<(u32, u32), f64> = HashMap::with_capacity(m.ttable.len());
            let mut totals: HashMap<u32, f64> = HashMap::new();
            let mut ll = 0.0;
            for (s, t) in &pairs {
                let positions = t.len() as f64;
                for &sw in s {
                    let denom: f64 = t.iter().map(|&tw| m.ttable[&(sw, tw)]).sum();
                    ll += (denom / positions).ln();
                    for &tw in t {
                        let frac = m.ttable[&(sw, tw)] / denom;
                        *counts.entry((sw, tw)).or_default() += frac;
                        *totals.entry(tw).or_default() += frac;
                    }
                }
            }
            for (key, c) in counts {
                // keep entries strictly positive
                let p = (c / totals[&key.1]).max(f64::MIN_POSITIVE);
                m.ttable.insert(key, p);
            }
            log.log_likelihood.push(ll);
        }
        Ok((m, log))
    }

    /// Builds a model from explicit `(source, target, probability)` triples;
    /// `target` may be [`NULL_TOKEN`]. Entries are taken as given.
    pub fn from_entries<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let mut m = Ibm1Model::empty();
        for (s, t, p) in entries {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(format!(
                    "probability {p} for ({s}, {t}) must be positive"
                )));
            }
            let sid = intern(&mut m.source_vocab, &mut m.source_index, s);
            let tid = intern(&mut m.target_vocab, &mut m.target_index, t);
            m.ttable.insert((sid, tid), p);
        }
        Ok(m)
    }

    /// `t(source | target)`, zero for pairs not in the table.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        match (self.source_index.get(source), self.target_index.get(target)) {
            (Some(&s), Some(&t)) => self.ttable.get(&(s, t)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Source words ranked by `t(· | target)`, best first.
    pub fn best_sources(&self, target: &str) -> Vec<(&str, f64)> {
        let Some(&tid) = self.target_index.get(target) else {
            return Vec::new();
        };
        let mut out: Vec<(&str, f64)> = self
            .ttable
            .iter()
            .filter(|((_, t), _)| *t == tid)
            .map(|(&(s, _), &p)| (self.source_vocab[s as usize].as_str(), p))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        out
    }

    /// Σ_s t(s | target) for every target word including NULL.
    pub fn target_masses(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for (&(_, t), &p) in &self.ttable {
            *sums.entry(self.target_vocab[t as usize].clone()).or_default() += p;
        }
        sums
    }

    pub fn len(&self) -> usize {
        self.ttable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ttable.is_empty()
    }

    /// Tab-separated `source\ttarget\tprob`, sorted by target then source.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(&str, &str, f64)> = self
            .ttable
            .iter()
            .map(|(&(s, t), &p)| {
                (
                    self.source_vocab[s as usize].as_str(),
                    self.target_vocab[t as usize].as_str(),
                    p,
                )
            })
            .collect();
        rows.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut out = String::new();
        for (s, t, p) in rows {
            let _ = writeln!(out, "{s}\t{t}\t{p}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, LoadReport)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, &path.display().to_string())
    }

    /// Parses the table; distributions that do not sum to one are
    /// renormalized with a warning and listed in the report.
    pub fn from_tsv(text: &str, context: &str) -> Result<(Self, LoadReport)> {
        let mut m = Ibm1Model::empty();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::parse(context, n + 1, "expected source<TAB>target<TAB>prob"));
            }
            let p: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(context, n + 1, "unparseable probability"))?;
            if !(p.is_finite() && p > 0.0 && p <= 1.0) {
                return Err(Error::parse(context, n + 1, format!("probability {p} outside (0, 1]")));
            }
            let sid = intern(&mut m.source_vocab, &mut m.source_index, fields[0]);
            let tid = intern(&mut m.target_vocab, &mut m.target_index, fields[1]);
            if m.ttable.insert((sid, tid), p).is_some() {
                return Err(Error::parse(context, n + 1, "duplicate entry"));
            }
        }
        let mut report = LoadReport::default();
        let mut sums: HashMap<u32, f64> = HashMap::new();
        for (&(_, t), &p) in &m.ttable {
            *sums.entry(t).or_default() += p;
        }
        let mut off: Vec<u32> = sums
            .iter()
            .filter(|(_, &s)| (s - 1.0).abs() > NORMALIZATION_TOLERANCE)
            .map(|(&t, _)| t)
            .collect();
        off.sort_unstable();
        for t in off {
            let z = sums[&t];
            for ((_, tt), p) in m.ttable.iter_mut() {
                if *tt == t {
                    *p /= z;
                }
            }
            let name = m.target_vocab[t as usize].clone();
            warn!("{context}: t(. | {name}) sums to {z}, renormalized");
            report.renormalized_targets.push(name);
        }
        Ok((m, report))
    }
}

impl ChannelModel for Ibm1Model {
    /// Σ_m log( 1/(N+1) Σ_{n=0..N} t(x_m | y_n) ) with y_0 = NULL.
    fn channel_logprob(&self, source: &Sentence, target: &Sentence) -> f64 {
        let tids: Vec<Option<u32>> = std::iter::once(Some(NULL_ID))
            .chain(target.iter().map(|w| self.target_index.get(w).copied()))
            .collect();
        let positions = tids.len() as f64;
        let mut total = 0.0;
        for sw in source.iter() {
            let mass = match self.source_index.get(sw) {
                Some(&sid) => tids
                    .iter()
                    .flatten()
                    .map(|&tid| self.ttable.get(&(sid, tid)).copied().unwrap_or(0.0))
                    .sum(),
                None => 0.0,
            };
            total += mass.max(UNSEEN_FLOOR).ln();
        }
        total - source.len() as f64 * positions.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        Sentence::parse(text).unwrap()
    }

    fn corpus(pairs: &[(&str, &str)]) -> ParallelSentenceCorpus {
        ParallelSentenceCorpus {
            pairs: pairs.iter().map(|(a, b)| (s(a), s(b))).collect(),
        }
    }

    #[test]
    fn single_pair_splits_mass_between_word_and_null() {
        let (m, _) = Ibm1Model::train(&corpus(&[("a", "b")]), 3).unwrap();
        assert!((m.prob("a", "b") - 1.0).abs() < 1e-12);
        assert!((m.prob("a", NULL_TOKEN) - 1.0).abs() < 1e-12);
        for (_, mass) in m.target_masses() {
            assert!((mass - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pigeonhole_disambiguation() {
        // ("a b" | "x y"), ("a" | "x"): after EM, a is the better source for x
        let (m, log) = Ibm1Model::train(&corpus(&[("a b", "x y"), ("a", "x")]), 10).unwrap();
        assert!(m.prob("a", "x") > m.prob("b", "x"));
        for w in log.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn two_iterations_match_hand_computation() {
        // hand-run EM, targets include NULL (written 0)
        // init: t(a|0)=t(b|0)=1/2, t(a|x)=t(b|x)=1/2, t(a|y)=t(b|y)=1/2
        // iter 1, pair 1 ("a b" | 0 x y): each source spreads 1/3 to 0, x, y
        //         pair 2 ("a" | 0 x): t(a|0)=t(a|x)=1/2 -> 1/2 each
        // counts: (a,0)=1/3+1/2, (b,0)=1/3, (a,x)=1/3+1/2, (b,x)=1/3, (a,y)=1/3, (b,y)=1/3
        // t(a|x) = (5/6)/(7/6) = 5/7, t(b|x) = 2/7
        let (m, _) = Ibm1Model::train(&corpus(&[("a b", "x y"), ("a", "x")]), 1).unwrap();
        assert!((m.prob("a", "x") - 5.0 / 7.0).abs() < 1e-12);
        assert!((m.prob("b", "x") - 2.0 / 7.0).abs() < 1e-12);
        assert!((m.prob("a", "y") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic_table_scores() {
        let m = Ibm1Model::from_entries([("a", "b", 1.0)]).unwrap();
        assert!((m.channel_logprob(&s("a"), &s("b")) - 0.5f64.ln()).abs() < 1e-12);
        assert!((m.channel_logprob(&s("a a"), &s("b")) - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_built_two_by_two_table() {
        // t(a|x)=0.6 t(b|x)=0.4 t(a|y)=0.3 t(b|y)=0.7 t(a|NULL)=0.5 t(b|NULL)=0.5
        let m = Ibm1Model::from_entries([
            ("a", "x", 0.6),
            ("b", "x", 0.4),
            ("a", "y", 0.3),
            ("b", "y", 0.7),
            ("a", NULL_TOKEN, 0.5),
            ("b", NULL_TOKEN, 0.5),
        ])
        .unwrap();
        // x="a b", y="x y": (0.5+0.6+0.3)/3 * (0.5+0.4+0.7)/3
        let expected = (1.4f64 / 3.0).ln() + (1.6f64 / 3.0).ln();
        assert!((m.channel_logprob(&s("a b"), &s("x y")) - expected).abs() < 1e-12);
    }

    #[test]
    fn unseen_source_uses_floor() {
        let m = Ibm1Model::from_entries([("a", "b", 1.0)]).unwrap();
        let lp = m.channel_logprob(&s("zzz"), &s("b"));
        assert!((lp - (UNSEEN_FLOOR.ln() - 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn tsv_round_trip() {
        let (m, _) = Ibm1Model::train(&corpus(&[("a b", "x y"), ("a", "x"), ("c b", "z y")]), 4).unwrap();
        let (back, report) = Ibm1Model::from_tsv(&m.to_tsv(), "mem").unwrap();
        assert!(report.renormalized_targets.is_empty());
        assert_eq!(back.to_tsv(), m.to_tsv());
        let (x, y) = (s("c a b"), s("z x y"));
        assert_eq!(m.channel_logprob(&x, &y), back.channel_logprob(&x, &y));
    }

    #[test]
    fn negative_probability_rejected() {
        assert!(Ibm1Model::from_tsv("a\tb\t-0.5\n", "mem").is_err());
        assert!(Ibm1Model::from_tsv("a\tb\n", "mem").is_err());
    }

    #[test]
    fn non_normalized_table_is_renormalized() {
        let (m, report) = Ibm1Model::from_tsv("a\tx\t0.2\nb\tx\t0.2\n", "mem").unwrap();
        assert_eq!(report.renormalized_targets, vec!["x".to_string()]);
        assert!((m.prob("a", "x") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn training_rejects_bad_input() {
        assert!(Ibm1Model::train(&ParallelSentenceCorpus::default(), 3).is_err());
        assert!(Ibm1Model::train(&corpus(&[("a", "b")]), 0).is_err());
    }
}
