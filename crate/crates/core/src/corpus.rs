//! Tokenized documents, parallel sentences and document-aligned corpora.
//!
//! The document corpus text format is one sentence per line with
//! space-separated tokens. Documents are separated by a single blank line and
//! may start with a `# doc_id` header line; documents without a header are
//! named `doc{index}`.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single non-empty, whitespace-free surface token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid token {surface:?}")));
        }
        Ok(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered, non-empty token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<Token>);

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence {
                context: "sentence constructor".into(),
            });
        }
        Ok(Sentence(tokens))
    }

    /// Splits `text` on whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<Token> = text.split_whitespace().map(|t| Token(t.to_string())).collect();
        if tokens.is_empty() {
            return Err(Error::EmptySentence {
                context: format!("{text:?}"),
            });
        }
        Ok(Sentence(tokens))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; sentences are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(Token::as_str)
    }

    pub fn to_lowercase(&self) -> Sentence {
        Sentence(self.0.iter().map(|t| Token(t.0.to_lowercase())).collect())
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&t.0)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Sentence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sentence::parse(s)
    }
}

impl Serialize for Sentence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sentence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Sentence::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(id: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        let id = id.into();
        if sentences.is_empty() {
            return Err(Error::EmptyDocument { doc_id: id });
        }
        Ok(Document { id, sentences })
    }

    /// Builds a document from one string per sentence.
    pub fn from_lines<S: AsRef<str>>(id: impl Into<String>, lines: &[S]) -> Result<Self> {
        let sentences = lines
            .iter()
            .map(|l| Sentence::parse(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Document::new(id, sentences)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelSentenceCorpus {
    pub pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelSentenceCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Source/target document pairs with equal sentence counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelDocumentCorpus {
    pub docs: Vec<(Document, Document)>,
}

impl ParallelDocumentCorpus {
    pub fn sources(&self) -> Vec<Document> {
        self.docs.iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Document> {
        self.docs.iter().map(|(_, t)| t.clone()).collect()
    }

    /// Flattens into sentence pairs, e.g. for channel training.
    pub fn sentence_pairs(&self) -> ParallelSentenceCorpus {
        let pairs = self
            .docs
            .iter()
            .flat_map(|(s, t)| s.sentences.iter().cloned().zip(t.sentences.iter().cloned()))
            .collect();
        ParallelSentenceCorpus { pairs }
    }
}

pub fn load_document_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_document_corpus(BufReader::new(file), &path.display().to_string())
}

/// Streams the document corpus format from any reader.
pub fn read_document_corpus<R: BufRead>(reader: R, context: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    let mut current_id: Option<String> = None;
    let mut current: Vec<Sentence> = Vec::new();
    // true right after a separator or at file start
    let mut at_doc_start = true;

    let mut finish = |id: Option<String>, sentences: Vec<Sentence>, docs: &mut Vec<Document>| -> Result<()> {
        let id = id.unwrap_or_else(|| format!("doc{}", docs.len()));
        if sentences.is_empty() {
            return Err(Error::EmptyDocument { doc_id: id });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateDocId(id));
        }
        docs.push(Document { id, sentences });
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(context, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if at_doc_start {
                let id = current_id.take().unwrap_or_else(|| format!("doc{}", docs.len()));
                return Err(Error::EmptyDocument { doc_id: id });
            }
            finish(current_id.take(), std::mem::take(&mut current), &mut docs)?;
            at_doc_start = true;
            continue;
        }
        if at_doc_start && current_id.is_none() {
            if let Some(header) = trimmed.strip_prefix('#') {
                let id = header.trim();
                if id.is_empty() || id.contains(char::is_whitespace) {
                    return Err(Error::parse(context, lineno + 1, "malformed doc_id header"));
                }
                current_id = Some(id.to_string());
                continue;
            }
        }
        at_doc_start = false;
        current.push(Sentence::parse(trimmed).map_err(|_| Error::parse(context, lineno + 1, "empty sentence"))?);
    }

    // a single trailing separator before EOF is tolerated
    if !current.is_empty() || current_id.is_some() {
        finish(current_id, current, &mut docs)?;
    }
    Ok(docs)
}

/// Writes documents in the corpus format, always emitting `# doc_id` headers.
pub fn write_document_corpus<W: Write>(mut out: W, docs: &[Document]) -> std::io::Result<()> {
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "# {}", doc.id)?;
        for s in &doc.sentences {
            writeln!(out, "{s}")?;
        }
    }
    Ok(())
}

pub fn save_document_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_document_corpus(&mut out, docs).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_sentence_lines(path: &Path) -> Result<Vec<Sentence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let s = Sentence::parse(&line).map_err(|_| Error::EmptySentence {
            context: format!("{}:{}", path.display(), i + 1),
        })?;
        out.push(s);
    }
    Ok(out)
}

/// Zips two one-sentence-per-line files.
pub fn load_parallel_sentences(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<ParallelSentenceCorpus> {
    let src = read_sentence_lines(src_path.as_ref())?;
    let tgt = read_sentence_lines(tgt_path.as_ref())?;
    if src.len() != tgt.len() {
        return Err(Error::CountMismatch(format!(
            "{} source lines vs {} target lines",
            src.len(),
            tgt.len()
        )));
    }
    Ok(ParallelSentenceCorpus {
        pairs: src.into_iter().zip(tgt).collect(),
    })
}

pub fn save_sentence_lines(path: impl AsRef<Path>, sentences: &[Sentence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for s in sentences {
        writeln!(out, "{s}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn zip_parallel_documents(src: Vec<Document>, tgt: Vec<Document>) -> Result<ParallelDocumentCorpus> {
    if src.len() != tgt.len() {
        return Err(Error::CountMismatch(format!(
            "{} source documents vs {} target documents",
            src.len(),
            tgt.len()
        )));
    }
    for (s, t) in src.iter().zip(&tgt) {
        if s.len() != t.len() {
            return Err(Error::CountMismatch(format!(
                "document {} has {} source sentences but {} ({}) has {} target sentences",
                s.id,
                s.len(),
                t.id,
                t.id,
                t.len()
            )));
        }
    }
    Ok(ParallelDocumentCorpus {
        docs: src.into_iter().zip(tgt).collect(),
    })
}
