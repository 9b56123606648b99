//! Feature extraction over pre-annotated text.
//!
//! Tokenization, part-of-speech tags and named-entity spans arrive with the
//! input; nothing here re-tokenizes or tags.

pub mod coref;
pub mod qa;

use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature::is_valid_namespace;

pub use coref::{CorefFeaturizer, Mention};
pub use qa::{PassageFeatures, QaFeaturizer, QuestionFeatures};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("entity span [{start}, {end}) is outside the {len} tokens of {id}")]
    SpanOutOfRange {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("entity spans [{a_start}, {a_end}) and [{b_start}, {b_end}) overlap in {id}")]
    OverlappingSpans {
        id: String,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("entity type {0:?} is not a valid feature namespace suffix")]
    InvalidEntityType(String),
    #[error("mention {0} has an empty surface")]
    EmptyMention(String),
    #[error("mention {id}: document term {term:?} has invalid weight {weight}")]
    InvalidTermWeight { id: String, term: String, weight: f64 },
}

/// Coarse part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Det,
    Adp,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub pos: Option<Pos>,
}

impl Token {
    pub fn new(text: impl Into<String>, pos: Option<Pos>) -> Self {
        Self {
            text: text.into(),
            pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeSpan {
    pub start: usize,
    pub end: usize,
    pub ne_type: String,
    pub surface: String,
}

/// A question or passage: tokens plus non-overlapping entity spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedText {
    pub id: String,
    pub tokens: Vec<Token>,
    pub nes: Vec<NeSpan>,
}

impl AnnotatedText {
    /// Validates spans against the tokens and fills in each span's surface.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<Token>,
        spans: impl IntoIterator<Item = (usize, usize, String)>,
    ) -> Result<Self, TextError> {
        let id = id.into();
        let mut nes: Vec<NeSpan> = Vec::new();
        for (start, end, ne_type) in spans {
            if start >= end || end > tokens.len() {
                return Err(TextError::SpanOutOfRange {
                    id,
                    start,
                    end,
                    len: tokens.len(),
                });
            }
            if !is_valid_namespace(&ne_type) {
                return Err(TextError::InvalidEntityType(ne_type));
            }
            let surface = tokens[start..end]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            nes.push(NeSpan {
                start,
                end,
                ne_type,
                surface,
            });
        }
        let mut order: Vec<&NeSpan> = nes.iter().collect();
        order.sort_by_key(|s| (s.start, s.end));
        for pair in order.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(TextError::OverlappingSpans {
                    id,
                    a_start: pair[0].start,
                    a_end: pair[0].end,
                    b_start: pair[1].start,
                    b_end: pair[1].end,
                });
            }
        }
        Ok(Self { id, tokens, nes })
    }

    /// Convenience constructor for untagged whitespace-separated text.
    pub fn from_words(id: impl Into<String>, text: &str) -> Self {
        let tokens = text.split_whitespace().map(|w| Token::new(w, None)).collect();
        Self {
            id: id.into(),
            tokens,
            nes: Vec::new(),
        }
    }
}

/// Stopword set; file format is one lowercase token per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

const BUILTIN_STOPWORDS: &str = include_str!("stopwords.txt");

impl Stopwords {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self(HashSet::new())
    }

    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn read<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut words = HashSet::new();
        for line in reader.lines() {
            let line = line?;
            let word = line.trim();
            if !word.is_empty() {
                words.insert(word.to_lowercase());
            }
        }
        Ok(Self(words))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How raw tokens become bag-of-words / tf-idf terms.
#[derive(Debug, Clone)]
pub struct TermPolicy {
    pub lowercase: bool,
    pub stopwords: Option<Arc<Stopwords>>,
}

impl Default for TermPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: Some(Arc::new(Stopwords::builtin())),
        }
    }
}

impl TermPolicy {
    /// Lowercasing policy with the given stopword list.
    pub fn new(stopwords: Stopwords) -> Self {
        Self {
            lowercase: true,
            stopwords: Some(Arc::new(stopwords)),
        }
    }

    /// Maps a token to its term, or `None` for stopwords and pure punctuation.
    pub fn term(&self, token: &str) -> Option<String> {
        if !token.chars().any(char::is_alphanumeric) {
            return None;
        }
        let term = if self.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        };
        match &self.stopwords {
            Some(stop) if stop.contains(&term.to_lowercase()) => None,
            _ => Some(term),
        }
    }

    pub fn terms<'a>(&'a self, tokens: &'a [Token]) -> impl Iterator<Item = String> + 'a {
        tokens.iter().filter_map(|t| self.term(&t.text))
    }
}

#[derive(Debug, Error)]
pub enum IdfError {
    #[error("corpus statistics need at least one document")]
    EmptyCorpus,
    #[error("idf file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Document frequencies for tf-idf weighting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdfTable {
    doc_count: u64,
    df: BTreeMap<String, u64>,
}

impl IdfTable {
    /// Counts, per term, the documents containing it at least once.
    pub fn from_documents<'a, I>(docs: I, policy: &TermPolicy) -> Result<Self, IdfError>
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut table = IdfTable::default();
        for tokens in docs {
            table.doc_count += 1;
            let distinct: HashSet<String> = policy.terms(tokens).collect();
            for term in distinct {
                *table.df.entry(term).or_insert(0) += 1;
            }
        }
        if table.doc_count == 0 {
            return Err(IdfError::EmptyCorpus);
        }
        Ok(table)
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn df(&self, term: &str) -> u64 {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    /// `ln((N + 1) / (df + 1)) + 1`; unseen terms use `df = 0`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(term) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#disck-idf v1 N={}", self.doc_count)?;
        for (term, df) in &self.df {
            writeln!(out, "{term}\t{df}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, IdfError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let doc_count = header
            .strip_prefix("#disck-idf v1 N=")
            .and_then(|n| n.trim().parse::<u64>().ok())
            .ok_or_else(|| IdfError::Parse {
                line: 1,
                reason: format!("bad header {header:?}"),
            })?;
        let mut df = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: &str| IdfError::Parse {
                line: i + 2,
                reason: reason.to_string(),
            };
            let (term, count) = line.rsplit_once('\t').ok_or_else(|| parse_err("missing tab"))?;
            let count: u64 = count.parse().map_err(|_| parse_err("bad document frequency"))?;
            if count == 0 || count > doc_count {
                return Err(parse_err("document frequency outside [1, N]"));
            }
            df.insert(term.to_string(), count);
        }
        Ok(Self { doc_count, df })
    }
}
