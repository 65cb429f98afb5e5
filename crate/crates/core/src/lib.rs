//! Document-level noisy-channel reranking of machine translation candidates.
//!
//! A source document is translated by picking one candidate per sentence
//! from a [`proposal::Lattice`]. [`decoder::doc_decode`] searches the
//! lattice with a document-context language model, a reverse channel model
//! and the proposal scores; [`decoder::sent_rerank`] is the sentence-level
//! baseline. The remaining modules train the scorers ([`lm`], [`channel`]),
//! tune weights ([`tuning`]), evaluate ([`eval`]) and generate synthetic
//! benchmarks ([`synth`]).

pub mod channel;
pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod lm;
pub mod proposal;
pub mod synth;
pub mod tuning;

/// Candidates per sentence.
pub const DEFAULT_NBEST: usize = 50;
/// Hypotheses kept by the document beam search.
pub const DEFAULT_BEAM: usize = 5;

pub use channel::{ChannelModel, Ibm1Model};
pub use corpus::{Document, ParallelDocumentCorpus, ParallelSentenceCorpus, Sentence, Token};
pub use decoder::{doc_decode, exhaustive_decode, sent_rerank, DecodeResult, ScoreBreakdown, Weights};
pub use error::{Error, Result};
pub use lm::{LanguageModel, NGramLm, SentenceLevel};
pub use proposal::{Candidate, Lattice};
