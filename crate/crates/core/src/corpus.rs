//! Line-delimited JSON corpus records.
//!
//! Each line holds one object:
//!
//! ```json
//! {"id":"p1","kind":"passage","tokens":[{"text":"Egypt","pos":"NOUN"}],"nes":[{"start":0,"end":1,"type":"GPE"}]}
//! ```
//!
//! `kind` is one of `passage`, `question`, `mention` or `document`. Mention
//! records also carry `ne_type` and `doc_id`, and optionally `doc_terms`
//! (`[["term", weight], ...]`); when absent, doc terms are computed from the
//! `document` records of the same file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{AnnotatedText, IdfError, IdfTable, Mention, Pos, TermPolicy, TextError, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Passage,
    Question,
    Mention,
    Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Pos>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRecord {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub ne_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub kind: RecordKind,
    pub tokens: Vec<TokenRecord>,
    #[serde(default)]
    pub nes: Vec<EntityRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ne_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_terms: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("record {id}: {reason}")]
    Record { id: String, reason: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Idf(#[from] IdfError),
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CorpusRecord {
    pub fn text(id: impl Into<String>, kind: RecordKind, tokens: &[Token], nes: Vec<EntityRecord>) -> Self {
        Self {
            id: id.into(),
            kind,
            tokens: tokens
                .iter()
                .map(|t| TokenRecord {
                    text: t.text.clone(),
                    pos: t.pos,
                })
                .collect(),
            nes,
            ne_type: None,
            doc_id: None,
            doc_terms: None,
        }
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.tokens.iter().map(|t| Token::new(t.text.clone(), t.pos)).collect()
    }

    pub fn surface(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn to_annotated(&self) -> Result<AnnotatedText, TextError> {
        AnnotatedText::new(
            self.id.clone(),
            self.tokens(),
            self.nes.iter().map(|e| (e.start, e.end, e.ne_type.clone())),
        )
    }

    /// Builds a mention; `doc_terms` overrides the record's own terms.
    pub fn to_mention(&self, doc_terms: Option<&[(String, f64)]>) -> Result<Mention, CorpusError> {
        let missing = |field: &str| CorpusError::Record {
            id: self.id.clone(),
            reason: format!("mention record needs `{field}`"),
        };
        let ne_type = self.ne_type.clone().ok_or_else(|| missing("ne_type"))?;
        let doc_id = self.doc_id.clone().ok_or_else(|| missing("doc_id"))?;
        let terms = self
            .doc_terms
            .clone()
            .or_else(|| doc_terms.map(<[_]>::to_vec))
            .unwrap_or_default();
        Ok(Mention::new(self.id.clone(), self.surface(), ne_type, doc_id, terms)?)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        self.to_annotated()?;
        if self.kind == RecordKind::Mention {
            self.to_mention(None)?;
        }
        Ok(())
    }
}

/// Parses and validates records, attaching line numbers to every error.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |reason: String| CorpusError::Line { line: i + 1, reason };
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        record.validate().map_err(|e| at(e.to_string()))?;
        if !ids.insert(record.id.clone()) {
            return Err(at(format!("duplicate id {}", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut out: W, records: &[CorpusRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Document frequencies over the token sequences of `records`.
pub fn compute_corpus_stats(records: &[CorpusRecord], policy: &TermPolicy) -> Result<IdfTable, IdfError> {
    let tokens: Vec<Vec<Token>> = records.iter().map(CorpusRecord::tokens).collect();
    IdfTable::from_documents(tokens.iter().map(Vec::as_slice), policy)
}

/// Tf-idf weighted terms for every `document` record, keyed by id.
pub fn document_terms(
    records: &[CorpusRecord],
    policy: &TermPolicy,
) -> Result<HashMap<String, Vec<(String, f64)>>, IdfError> {
    let docs: Vec<&CorpusRecord> = records.iter().filter(|r| r.kind == RecordKind::Document).collect();
    if docs.is_empty() {
        return Ok(HashMap::new());
    }
    let tokens: Vec<Vec<Token>> = docs.iter().map(|r| r.tokens()).collect();
    let idf = IdfTable::from_documents(tokens.iter().map(Vec::as_slice), policy)?;
    Ok(docs
        .iter()
        .zip(&tokens)
        .map(|(doc, toks)| {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for term in policy.terms(toks) {
                *tf.entry(term).or_insert(0) += 1;
            }
            let terms = tf
                .into_iter()
                .map(|(t, c)| {
                    let w = f64::from(c) * idf.idf(&t);
                    (t, w)
                })
                .collect();
            (doc.id.clone(), terms)
        })
        .collect())
}

/// All mention records as mentions, with doc terms filled in from the
/// `document` records of `context` where the mention has none.
pub fn mentions(records: &[CorpusRecord], context: &[CorpusRecord], policy: &TermPolicy) -> Result<Vec<Mention>, CorpusError> {
    let terms = document_terms(context, policy)?;
    records
        .iter()
        .filter(|r| r.kind == RecordKind::Mention)
        .map(|r| {
            let doc = r.doc_id.as_deref().and_then(|d| terms.get(d));
            r.to_mention(doc.map(Vec::as_slice))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"id":"p1","kind":"passage","tokens":[{"text":"Cairo","pos":"NOUN"},{"text":"is","pos":"VERB"}],"nes":[{"start":0,"end":1,"type":"GPE"}]}
{"id":"p2","kind":"passage","tokens":[{"text":"dog"}]}
{"id":"q1","kind":"question","tokens":[{"text":"Who"},{"text":"?"}]}
"#;

    #[test]
    fn reads_valid_lines() {
        let records = read_corpus(THREE.as_bytes()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].to_annotated().unwrap().nes[0].surface, "Cairo");
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let bad_span = r#"{"id":"p1","kind":"passage","tokens":[{"text":"a"}],"nes":[{"start":0,"end":2,"type":"GPE"}]}"#;
        let text = format!("{}\n{bad_span}\n", THREE.lines().nth(1).unwrap());
        match read_corpus(text.as_bytes()) {
            Err(CorpusError::Line { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let dup = format!("{}\n{}\n", THREE.lines().nth(1).unwrap(), THREE.lines().nth(1).unwrap());
        assert!(matches!(read_corpus(dup.as_bytes()), Err(CorpusError::Line { line: 2, .. })));
        assert!(matches!(read_corpus("{oops\n".as_bytes()), Err(CorpusError::Line { line: 1, .. })));
        let no_type = r#"{"id":"m","kind":"mention","tokens":[{"text":"A"}],"doc_id":"d"}"#;
        assert!(read_corpus(no_type.as_bytes()).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let records = read_corpus(THREE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &records).unwrap();
        assert_eq!(read_corpus(&buf[..]).unwrap(), records);
    }

    fn doc(id: &str, words: &str) -> CorpusRecord {
        let tokens: Vec<Token> = words.split_whitespace().map(|w| Token::new(w, None)).collect();
        CorpusRecord::text(id, RecordKind::Document, &tokens, vec![])
    }

    #[test]
    fn corpus_stats() {
        let policy = TermPolicy::default();
        let idf = compute_corpus_stats(&[doc("a", "the dog"), doc("b", "a dog")], &policy).unwrap();
        assert_eq!((idf.df("dog"), idf.doc_count()), (2, 2));
        assert_eq!(idf.df("the"), 0);
        let docs: Vec<CorpusRecord> = (0..10)
            .map(|i| doc(&format!("d{i}"), if i == 3 { "zebra" } else { "horse" }))
            .collect();
        assert_eq!(compute_corpus_stats(&docs, &policy).unwrap().df("zebra"), 1);
        assert!(compute_corpus_stats(&[], &policy).is_err());
    }

    #[test]
    fn mention_doc_terms_from_documents() {
        let policy = TermPolicy::default();
        let mut m = doc("m1", "Tehran");
        m.kind = RecordKind::Mention;
        m.ne_type = Some("GPE".into());
        m.doc_id = Some("d1".into());
        let records = vec![doc("d1", "iran capital city"), doc("d2", "paris city"), m];
        let got = mentions(&records, &records, &policy).unwrap();
        assert_eq!(got.len(), 1);
        let terms: Vec<&str> = got[0].doc_terms.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(terms, vec!["capital", "city", "iran"]);
    }
}
