//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::Ibm1Model;
use crate::corpus::{
    load_document_corpus, load_parallel_sentences, save_document_corpus, save_sentence_lines, zip_parallel_documents,
    Document, Sentence,
};
use crate::decoder::{doc_decode, posterior_dependency_probe, sent_rerank, DecodeResult, Weights};
use crate::error::{Error, Result};
use crate::eval::{consistency_accuracy, corpus_bleu_with, lattice_pairwise_bleu, oracle_pick_ratio, BleuOptions};
use crate::lm::{perplexity_per_word, NGramLm, SentenceLevel, DEFAULT_DISCOUNT, DEFAULT_ORDER};
use crate::proposal::{load_nbest, merge_expert_pools, save_nbest, Lattice};
use crate::synth::{generate_corpus, load_annotations, make_ambiguous_lattices, save_annotations, SynthConfig};
use crate::tuning::{grid_search, GridSpec};
use crate::{DEFAULT_BEAM, DEFAULT_NBEST};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "doc-reranker", version, about = "Document-level noisy-channel reranking")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    /// Interpolation weights `l1,l2,l3[,llm]`.
    #[arg(long, global = true)]
    #[serde(default, deserialize_with = "weights_from_str")]
    pub weights: Option<Weights>,
    /// Document beam size.
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    /// Candidates kept per sentence.
    #[arg(long, global = true)]
    pub nbest: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with any of the options above.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn weights_from_str<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Weights>, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map(Some).map_err(serde::de::Error::custom)
}

impl Common {
    fn merged(self) -> Result<Common> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Common =
            toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        Ok(Common {
            weights: self.weights.or(file.weights),
            beam: self.beam.or(file.beam),
            nbest: self.nbest.or(file.nbest),
            seed: self.seed.or(file.seed),
            threads: self.threads.or(file.threads),
            config: self.config,
        })
    }

    fn weights(&self) -> Weights {
        self.weights.unwrap_or_default()
    }

    fn beam(&self) -> usize {
        self.beam.unwrap_or(DEFAULT_BEAM)
    }

    fn nbest(&self) -> usize {
        self.nbest.unwrap_or(DEFAULT_NBEST)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Source documents.
    #[arg(long)]
    pub source: PathBuf,
    /// n-best candidates (JSON lines).
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub channel: PathBuf,
    /// Decode records (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the chosen translations as a document corpus.
    #[arg(long)]
    pub hyp_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Kneser-Ney n-gram LM.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
        discount: f64,
        /// Reset context at every sentence.
        #[arg(long)]
        sentence_level: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the IBM Model 1 channel p(source | target).
    TrainChannel {
        /// Source sentences, one per line.
        #[arg(long)]
        src: PathBuf,
        /// Target sentences, one per line.
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Document beam search.
    Decode(DecodeArgs),
    /// Sentence-level reranking baseline.
    SentRerank(DecodeArgs),
    /// Grid search over λ1, λ2, λ3 on a dev set.
    Tune {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        channel: PathBuf,
        /// Full table (TSV).
        #[arg(long)]
        table: PathBuf,
    },
    /// Corpus BLEU, optionally with consistency accuracy.
    EvalBleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref", required = true)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        lowercase: bool,
        #[arg(long)]
        smooth: bool,
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Pairwise BLEU of candidate pools, merging one file per expert.
    AnalyzeDiversity {
        #[arg(long)]
        source: PathBuf,
        #[arg(long = "candidates", required = true)]
        candidates: Vec<PathBuf>,
    },
    /// How often each ranker picks an injected reference.
    OraclePick {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        sent_lm: PathBuf,
        #[arg(long)]
        channel: PathBuf,
    },
    /// Generate a synthetic benchmark.
    SynthGen {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        docs: usize,
        #[arg(long, default_value_t = 5)]
        sentences: usize,
        #[arg(long, default_value_t = 0.5)]
        ambiguity_rate: f64,
        #[arg(long, default_value_t = 30)]
        vocab: usize,
    },
    /// Swap the first slot of each document with a donor's and report
    /// whether the second sentence's choice moves.
    ProbeDependency {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        channel: PathBuf,
        /// Document whose first sentence and candidates are transplanted.
        #[arg(long)]
        donor: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let common = cli.common.merged()?;
    if let Some(w) = &common.weights {
        w.validate()?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&common, cli.command))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = create(path)?;
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::io(path, e.into()))?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn load_lattices(source: &Path, candidates: &Path, k: usize) -> Result<Vec<Lattice>> {
    let docs = load_document_corpus(source)?;
    Ok(load_nbest(candidates, &docs)?.iter().map(|l| l.truncated(k)).collect())
}

fn load_channel(path: &Path) -> Result<Ibm1Model> {
    let (m, report) = Ibm1Model::load(path)?;
    if !report.renormalized_targets.is_empty() {
        log::warn!(
            "{}: renormalized {} targets",
            path.display(),
            report.renormalized_targets.len()
        );
    }
    Ok(m)
}

fn decode_outputs(path: &Path, hyp_out: Option<&Path>, results: &[DecodeResult]) -> Result<()> {
    write_jsonl(path, results)?;
    if let Some(h) = hyp_out {
        let docs: Vec<Document> = results.iter().map(|r| r.output.clone()).collect();
        save_document_corpus(h, &docs)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    doc_reranker: f64,
    sent_reranker: f64,
    proposal_only: f64,
    slots: usize,
}

fn dispatch(common: &Common, command: Command) -> Result<()> {
    use rayon::prelude::*;
    match command {
        Command::TrainLm {
            corpus,
            order,
            discount,
            sentence_level,
            out,
        } => {
            let docs = load_document_corpus(&corpus)?;
            let lm = if sentence_level {
                NGramLm::train_sentences(&docs, order, discount)?
            } else {
                NGramLm::train(&docs, order, discount)?
            };
            lm.save(&out)?;
            let ppl = perplexity_per_word(&lm, &docs)?;
            log::info!("training perplexity {:.3} ({})", ppl.perplexity, ppl.convention);
            print_json(&ppl);
        }
        Command::TrainChannel {
            src,
            tgt,
            iterations,
            out,
        } => {
            let corpus = load_parallel_sentences(&src, &tgt)?;
            let (model, log) = Ibm1Model::train(&corpus, iterations)?;
            model.save(&out)?;
            print_json(&log);
        }
        Command::Decode(a) => {
            let lattices = load_lattices(&a.source, &a.candidates, common.nbest())?;
            let lm = NGramLm::load(&a.lm)?;
            let channel = load_channel(&a.channel)?;
            let w = common.weights();
            let results = lattices
                .par_iter()
                .map(|l| doc_decode(l, &lm, &channel, &w, common.beam()))
                .collect::<Result<Vec<_>>>()?;
            decode_outputs(&a.out, a.hyp_out.as_deref(), &results)?;
        }
        Command::SentRerank(a) => {
            let lattices = load_lattices(&a.source, &a.candidates, common.nbest())?;
            let lm = SentenceLevel(NGramLm::load(&a.lm)?);
            let channel = load_channel(&a.channel)?;
            let w = common.weights();
            let results = lattices
                .par_iter()
                .map(|l| sent_rerank(l, &lm, &channel, &w))
                .collect::<Result<Vec<_>>>()?;
            decode_outputs(&a.out, a.hyp_out.as_deref(), &results)?;
        }
        Command::Tune {
            source,
            reference,
            candidates,
            lm,
            channel,
            table,
        } => {
            let src = load_document_corpus(&source)?;
            let dev = zip_parallel_documents(src, load_document_corpus(&reference)?)?;
            let lattices = load_lattices(&source, &candidates, common.nbest())?;
            let lm = NGramLm::load(&lm)?;
            let channel = load_channel(&channel)?;
            let result = grid_search(&dev, &lattices, &lm, &channel, &GridSpec::default(), common.beam())?;
            result.save_tsv(&table)?;
            println!("{}\t{:.4}", result.best, result.metric);
        }
        Command::EvalBleu {
            hyp,
            refs,
            lowercase,
            smooth,
            annotations,
        } => {
            let hyps = load_document_corpus(&hyp)?;
            let refs = refs.iter().map(load_document_corpus).collect::<Result<Vec<_>>>()?;
            let report = corpus_bleu_with(&hyps, &refs, BleuOptions { lowercase, smooth })?;
            let consistency = match annotations {
                Some(p) => Some(consistency_accuracy(&hyps, &load_annotations(p)?)?),
                None => None,
            };
            print_json(&serde_json::json!({ "bleu": report, "consistency_accuracy": consistency }));
        }
        Command::AnalyzeDiversity { source, candidates } => {
            let docs = load_document_corpus(&source)?;
            let experts = candidates
                .iter()
                .map(|p| load_nbest(p, &docs))
                .collect::<Result<Vec<_>>>()?;
            let merged = (0..docs.len())
                .map(|d| {
                    let pools: Vec<Lattice> = experts.iter().map(|e| e[d].clone()).collect();
                    merge_expert_pools(&pools, common.nbest())
                })
                .collect::<Result<Vec<_>>>()?;
            let pbleu = lattice_pairwise_bleu(&merged, BleuOptions::default())?;
            print_json(
                &serde_json::json!({ "experts": candidates.len(), "k": common.nbest(), "pairwise_bleu": pbleu }),
            );
        }
        Command::OraclePick {
            source,
            reference,
            candidates,
            lm,
            sent_lm,
            channel,
        } => {
            let refs = load_document_corpus(&reference)?;
            let lattices = load_lattices(&source, &candidates, common.nbest())?;
            if refs.len() != lattices.len() {
                return Err(Error::CountMismatch(format!(
                    "{} reference documents vs {} lattices",
                    refs.len(),
                    lattices.len()
                )));
            }
            let injected = lattices
                .iter()
                .zip(&refs)
                .map(|(l, r)| {
                    let floor = l
                        .slots()
                        .iter()
                        .flatten()
                        .map(|c| c.proposal_logprob)
                        .fold(f64::INFINITY, f64::min);
                    l.with_references(r, floor, "reference")
                })
                .collect::<Result<Vec<_>>>()?;
            let marks: Vec<_> = injected
                .iter()
                .zip(&refs)
                .map(|(l, r)| l.reference_marks(&[r]))
                .collect();
            let lm = NGramLm::load(&lm)?;
            let sent_lm = SentenceLevel(NGramLm::load(&sent_lm)?);
            let channel = load_channel(&channel)?;
            let w = common.weights();
            let doc: Vec<Vec<usize>> = injected
                .par_iter()
                .map(|l| doc_decode(l, &lm, &channel, &w, common.beam()).map(|r| r.chosen))
                .collect::<Result<_>>()?;
            let sent: Vec<Vec<usize>> = injected
                .par_iter()
                .map(|l| sent_rerank(l, &sent_lm, &channel, &w).map(|r| r.chosen))
                .collect::<Result<_>>()?;
            // slots are sorted by proposal score, so index 0 is the proposal's pick
            let proposal: Vec<Vec<usize>> = injected.iter().map(|l| vec![0; l.len()]).collect();
            print_json(&OracleReport {
                doc_reranker: oracle_pick_ratio(&marks, &doc)?,
                sent_reranker: oracle_pick_ratio(&marks, &sent)?,
                proposal_only: oracle_pick_ratio(&marks, &proposal)?,
                slots: marks.iter().map(Vec::len).sum(),
            });
        }
        Command::SynthGen {
            out_dir,
            docs,
            sentences,
            ambiguity_rate,
            vocab,
        } => {
            let cfg = SynthConfig {
                num_docs: docs,
                sentences_per_doc: sentences,
                content_vocab: vocab,
                ambiguity_rate,
                seed: common.seed(),
                ..SynthConfig::default()
            };
            let corpus = generate_corpus(&cfg)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let src = corpus.corpus.sources();
            let tgt = corpus.corpus.targets();
            save_document_corpus(out_dir.join("src.txt"), &src)?;
            save_document_corpus(out_dir.join("tgt.txt"), &tgt)?;
            let lines =
                |docs: &[Document]| -> Vec<Sentence> { docs.iter().flat_map(|d| d.sentences.clone()).collect() };
            save_sentence_lines(out_dir.join("src.sent"), &lines(&src))?;
            save_sentence_lines(out_dir.join("tgt.sent"), &lines(&tgt))?;
            save_annotations(out_dir.join("annotations.jsonl"), &corpus.annotations)?;
            let lattices = make_ambiguous_lattices(&corpus, common.nbest(), vocab, common.seed())?;
            save_nbest(out_dir.join("candidates.jsonl"), &lattices)?;
            print_json(&serde_json::json!({
                "documents": src.len(),
                "annotations": corpus.annotations.len(),
            }));
        }
        Command::ProbeDependency {
            source,
            candidates,
            lm,
            channel,
            donor,
            out,
        } => {
            let lattices = load_lattices(&source, &candidates, common.nbest())?;
            let donor = lattices
                .iter()
                .find(|l| l.doc_id == donor)
                .ok_or_else(|| Error::UnknownDocument(donor.clone()))?
                .clone();
            let lm = NGramLm::load(&lm)?;
            let channel = load_channel(&channel)?;
            let w = common.weights();
            let reports = lattices
                .par_iter()
                .filter(|l| l.doc_id != donor.doc_id && l.len() >= 2)
                .map(|l| {
                    posterior_dependency_probe(
                        l,
                        donor.source.sentences[0].clone(),
                        donor.slot(0).to_vec(),
                        &lm,
                        &channel,
                        &w,
                        common.beam(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let changed = reports.iter().filter(|r| r.changed).count();
            write_jsonl(&out, &reports)?;
            println!("{changed} of {} second-sentence choices changed", reports.len());
        }
    }
    Ok(())
}
