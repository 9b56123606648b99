//! Inverted index over binary candidate vectors.

mod codec;
mod search;

pub use codec::{load_index, save_index, CodecError, FORMAT_VERSION, MAGIC};
pub use search::{exhaustive_search, Hit, SearchResult, SearchStats};

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::feature::{Feature, SparseVector};
use crate::scalar::Weight;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("document {doc}: feature {feature} has weight {weight}, candidate vectors must be binary")]
    NonBinaryWeight {
        doc: String,
        feature: String,
        weight: String,
    },
    #[error("document id {0} appears more than once")]
    DuplicateDocId(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index holds more than u32::MAX documents")]
    TooManyDocuments,
}

/// Postings per feature; document ordinals follow ingestion order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvertedIndex {
    postings: HashMap<Feature, Vec<u32>>,
    doc_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexStats {
    pub doc_count: usize,
    pub feature_count: usize,
    pub total_postings: usize,
}

/// Accumulates candidates one at a time.
#[derive(Debug, Default)]
pub struct IndexBuilder {
    index: InvertedIndex,
    seen: HashSet<String>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<S: Weight>(&mut self, doc_id: &str, vector: &SparseVector<S>) -> Result<u32, IndexError> {
        if let Some((f, w)) = vector.iter().find(|(_, w)| !w.is_one()) {
            return Err(IndexError::NonBinaryWeight {
                doc: doc_id.to_string(),
                feature: f.to_string(),
                weight: w.to_string(),
            });
        }
        if !self.seen.insert(doc_id.to_string()) {
            return Err(IndexError::DuplicateDocId(doc_id.to_string()));
        }
        let ordinal = u32::try_from(self.index.doc_ids.len()).map_err(|_| IndexError::TooManyDocuments)?;
        self.index.doc_ids.push(doc_id.to_string());
        for f in vector.features() {
            self.index.postings.entry(f.clone()).or_default().push(ordinal);
        }
        Ok(ordinal)
    }

    pub fn finish(self) -> InvertedIndex {
        self.index
    }
}

impl InvertedIndex {
    pub fn build<S, I, D>(candidates: I) -> Result<Self, IndexError>
    where
        S: Weight,
        D: AsRef<str>,
        I: IntoIterator<Item = (D, SparseVector<S>)>,
    {
        let mut builder = IndexBuilder::new();
        for (id, vector) in candidates {
            builder.add(id.as_ref(), &vector)?;
        }
        Ok(builder.finish())
    }

    pub(crate) fn from_parts(postings: HashMap<Feature, Vec<u32>>, doc_ids: Vec<String>) -> Self {
        Self { postings, doc_ids }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_id(&self, ordinal: u32) -> &str {
        &self.doc_ids[ordinal as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn postings(&self, feature: &Feature) -> &[u32] {
        self.postings.get(feature).map_or(&[], Vec::as_slice)
    }

    /// Features in serialized order.
    pub fn features(&self) -> Vec<&Feature> {
        let mut out: Vec<&Feature> = self.postings.keys().collect();
        out.sort();
        out
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            doc_count: self.doc_ids.len(),
            feature_count: self.postings.len(),
            total_postings: self.postings.values().map(Vec::len).sum(),
        }
    }
}

pub fn index_stats(index: &InvertedIndex) -> IndexStats {
    index.stats()
}
