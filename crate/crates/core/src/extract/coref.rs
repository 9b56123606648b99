//! Mention features for cross-document coreferent mention retrieval.
//!
//! Each mention is summarized as
//! `f_overall = f_type ⊗ (f_text + f_acro + f_l3g + f_dc)` and a pair of
//! mentions is composed by joining their overall vectors.

use super::TextError;
use crate::feature::{Feature, SparseVector};
use crate::scalar::Weight;

pub const NS_TEXT: &str = "text";
pub const NS_TYPE: &str = "type";
pub const NS_ACRONYM: &str = "acro";
pub const NS_TRIGRAM: &str = "l3g";
pub const NS_DOC_CONTEXT: &str = "dc";

const KNOWN_TYPES: [&str; 5] = ["PERSON", "LOC", "GPE", "ORG", "OTHER"];
const DOC_CONTEXT_TERMS: usize = 10;

fn feature(ns: &str, value: &str) -> Feature {
    Feature::new(ns, value).expect("built-in namespaces are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mention {
    pub id: String,
    pub surface: String,
    pub ne_type: String,
    pub doc_id: String,
    /// Tf-idf weighted terms of the surrounding document.
    pub doc_terms: Vec<(String, f64)>,
}

impl Mention {
    pub fn new(
        id: impl Into<String>,
        surface: impl Into<String>,
        ne_type: impl Into<String>,
        doc_id: impl Into<String>,
        doc_terms: Vec<(String, f64)>,
    ) -> Result<Self, TextError> {
        let id = id.into();
        let surface = surface.into();
        if surface.trim().is_empty() {
            return Err(TextError::EmptyMention(id));
        }
        if let Some((term, weight)) = doc_terms.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(TextError::InvalidTermWeight {
                id,
                term: term.clone(),
                weight: *weight,
            });
        }
        Ok(Self {
            id,
            surface,
            ne_type: ne_type.into(),
            doc_id: doc_id.into(),
            doc_terms,
        })
    }
}

pub fn extract_mention_text<S: Weight>(m: &Mention) -> SparseVector<S> {
    SparseVector::singleton(feature(NS_TEXT, &m.surface), S::one())
}

/// Entity type, with anything outside PERSON/LOC/GPE/ORG mapped to OTHER.
pub fn extract_type<S: Weight>(m: &Mention) -> SparseVector<S> {
    let upper = m.ne_type.to_uppercase();
    let ty = if KNOWN_TYPES.contains(&upper.as_str()) {
        upper.as_str()
    } else {
        "OTHER"
    };
    SparseVector::singleton(feature(NS_TYPE, ty), S::one())
}

/// Initials of the capitalized words of a multi-word mention
/// ("United States of America" gives USA).
pub fn extract_acronym<S: Weight>(m: &Mention) -> SparseVector<S> {
    let words: Vec<&str> = m.surface.split_whitespace().collect();
    if words.len() < 2 {
        return SparseVector::new();
    }
    let acronym: String = words
        .iter()
        .filter_map(|w| w.chars().next())
        .filter(|c| c.is_uppercase())
        .flat_map(char::to_uppercase)
        .collect();
    if acronym.chars().count() >= 2 {
        SparseVector::singleton(feature(NS_ACRONYM, &acronym), S::one())
    } else {
        SparseVector::new()
    }
}

/// Letter trigrams of each lowercased word; words under three characters are
/// kept whole.
pub fn extract_letter_trigrams<S: Weight>(m: &Mention) -> SparseVector<S> {
    let lower = m.surface.to_lowercase();
    let mut grams = Vec::new();
    for word in lower.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() < 3 {
            grams.push(word.to_string());
        } else {
            grams.extend(chars.windows(3).map(|w| w.iter().collect::<String>()));
        }
    }
    SparseVector::binary(grams.iter().map(|g| feature(NS_TRIGRAM, g)))
}

/// The ten highest-weighted document terms; ties go to the lexicographically
/// smaller term.
pub fn extract_doc_context<S: Weight>(m: &Mention) -> SparseVector<S> {
    let mut terms: Vec<&(String, f64)> = m.doc_terms.iter().collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut kept: Vec<&str> = Vec::with_capacity(DOC_CONTEXT_TERMS);
    for (term, _) in terms {
        if kept.len() == DOC_CONTEXT_TERMS {
            break;
        }
        if !kept.contains(&term.as_str()) {
            kept.push(term);
        }
    }
    SparseVector::binary(kept.into_iter().map(|t| feature(NS_DOC_CONTEXT, t)))
}

/// `f_type ⊗ (f_text + f_acro + f_l3g + f_dc)`.
pub fn overall<S: Weight>(m: &Mention) -> SparseVector<S> {
    let body = &(&extract_mention_text::<S>(m) + &extract_acronym(m))
        + &(&extract_letter_trigrams(m) + &extract_doc_context(m));
    extract_type::<S>(m).cartesian(&body)
}

/// `f_overall(a) ⋈ f_overall(b)`.
pub fn compose_coref<S: Weight>(a: &Mention, b: &Mention) -> SparseVector<S> {
    overall::<S>(a).join(&overall(b))
}

/// Stateless entry point mirroring [`super::QaFeaturizer`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CorefFeaturizer;

impl CorefFeaturizer {
    pub fn mention<S: Weight>(&self, m: &Mention) -> SparseVector<S> {
        overall(m)
    }

    pub fn compose<S: Weight>(&self, a: &Mention, b: &Mention) -> SparseVector<S> {
        compose_coref(a, b)
    }
}
