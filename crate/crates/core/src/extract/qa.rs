//! Question/passage features and the pairwise QA composition
//!
//! ```text
//! C(q, p) = (f_wh ⊗ f_lat) ⊗ f_NEType(p)
//!         + (f_wh ⊗ f_lat) ⊗ f_BoW(p)
//!         + f_NE(q) ⋈ f_NE(p)
//!         + f_TfIdf(q) ⋈ f_BoW(p)
//! ```
//!
//! with an optional `(f_wh ⊗ f_lat) ⊗ f_allCaps(p)` block.

use std::collections::BTreeMap;

use super::{AnnotatedText, IdfTable, Pos, TermPolicy};
use crate::feature::{Feature, SparseVector};
use crate::scalar::{Scalar, Weight};

pub const NS_QWORD: &str = "qword";
pub const NS_LAT: &str = "lat";
pub const NS_WORD: &str = "word";
pub const NS_NE_TYPE: &str = "ne-type";
pub const NS_ALL_CAPS: &str = "allCaps";

/// Value used when a question has no lexical answer type.
pub const EMPTY_LAT: &str = "∅";
/// Value used when a question has no wh-word.
pub const NO_QWORD: &str = "other";

const WH_WORDS: [&str; 9] = [
    "who", "whom", "whose", "what", "which", "when", "where", "why", "how",
];

fn feature(ns: &str, value: &str) -> Feature {
    Feature::new(ns, value).expect("built-in namespaces are valid")
}

/// Position and lowercased form of the first wh-word.
fn find_wh(q: &AnnotatedText) -> Option<(usize, String)> {
    q.tokens.iter().enumerate().find_map(|(i, t)| {
        let lower = t.text.to_lowercase();
        WH_WORDS.contains(&lower.as_str()).then_some((i, lower))
    })
}

fn qword_value(q: &AnnotatedText) -> String {
    match find_wh(q) {
        Some((i, w)) if w == "how" => match q.tokens.get(i + 1) {
            Some(next) if next.text.chars().any(char::is_alphanumeric) => {
                format!("how {}", next.text.to_lowercase())
            }
            _ => w,
        },
        Some((_, w)) => w,
        None => NO_QWORD.to_string(),
    }
}

/// `(qword=w, 1)`; "how" absorbs the following word ("how many").
pub fn extract_qword<S: Weight>(q: &AnnotatedText) -> SparseVector<S> {
    SparseVector::singleton(feature(NS_QWORD, &qword_value(q)), S::one())
}

/// `(lat=h, 1)` for what/which questions, where `h` is the last token of the
/// first run of nouns after the question word; `(lat=∅, 1)` otherwise.
pub fn extract_lat<S: Weight>(q: &AnnotatedText) -> SparseVector<S> {
    let head = match find_wh(q) {
        Some((i, w)) if w == "what" || w == "which" => {
            let rest = &q.tokens[i + 1..];
            let start = rest.iter().position(|t| t.pos == Some(Pos::Noun));
            start.map(|s| {
                let run = rest[s..]
                    .iter()
                    .take_while(|t| t.pos == Some(Pos::Noun))
                    .count();
                rest[s + run - 1].text.to_lowercase()
            })
        }
        _ => None,
    };
    SparseVector::singleton(
        feature(NS_LAT, head.as_deref().unwrap_or(EMPTY_LAT)),
        S::one(),
    )
}

/// `(ne-<type>=<surface>, 1)` per distinct entity.
pub fn extract_named_entities<S: Weight>(t: &AnnotatedText) -> SparseVector<S> {
    SparseVector::binary(t.nes.iter().map(|ne| {
        let ns = format!("ne-{}", ne.ne_type.to_lowercase());
        feature(&ns, &ne.surface)
    }))
}

/// L2-normalized tf-idf bag of words; empty when every token is filtered.
pub fn extract_tfidf<S: Scalar>(
    q: &AnnotatedText,
    idf: &IdfTable,
    policy: &TermPolicy,
) -> SparseVector<S> {
    let mut tf: BTreeMap<String, u32> = BTreeMap::new();
    for term in policy.terms(&q.tokens) {
        *tf.entry(term).or_insert(0) += 1;
    }
    let raw: SparseVector<S> = tf
        .into_iter()
        .map(|(term, count)| {
            let w = f64::from(count) * idf.idf(&term);
            (feature(NS_WORD, &term), S::of(w))
        })
        .collect();
    raw.l2_normalize().unwrap_or_default()
}

/// `(word=x, 1)` per distinct term.
pub fn extract_bow<S: Weight>(p: &AnnotatedText, policy: &TermPolicy) -> SparseVector<S> {
    SparseVector::binary(policy.terms(&p.tokens).map(|t| feature(NS_WORD, &t)))
}

/// `(ne-type=T, 1)` per distinct entity type.
pub fn extract_ne_types<S: Weight>(p: &AnnotatedText) -> SparseVector<S> {
    SparseVector::binary(p.nes.iter().map(|ne| feature(NS_NE_TYPE, &ne.ne_type)))
}

fn is_all_caps(word: &str) -> bool {
    word.chars().count() >= 2 && word.chars().all(|c| c.is_alphabetic() && c.is_uppercase())
}

/// `(allCaps=TRUE, 1)` when some token of two or more letters is all
/// uppercase.
pub fn extract_all_caps<S: Weight>(p: &AnnotatedText) -> SparseVector<S> {
    if p.tokens.iter().any(|t| is_all_caps(&t.text)) {
        SparseVector::singleton(feature(NS_ALL_CAPS, "TRUE"), S::one())
    } else {
        SparseVector::new()
    }
}

/// Query-side features.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionFeatures<S> {
    /// `f_wh ⊗ f_lat`.
    pub wh_lat: SparseVector<S>,
    pub named_entities: SparseVector<S>,
    pub tfidf: SparseVector<S>,
}

/// Candidate-side features; all binary.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageFeatures<S> {
    pub ne_types: SparseVector<S>,
    pub bow: SparseVector<S>,
    pub named_entities: SparseVector<S>,
    /// Empty unless the all-caps extractor is enabled.
    pub all_caps: SparseVector<S>,
}

impl<S: Weight> PassageFeatures<S> {
    /// `f_P(p)`, the vector stored in the index.
    pub fn candidate_vector(&self) -> SparseVector<S> {
        SparseVector::binary(
            self.ne_types
                .features()
                .chain(self.bow.features())
                .chain(self.named_entities.features())
                .chain(self.all_caps.features())
                .cloned(),
        )
    }
}

impl<S: Weight> QuestionFeatures<S> {
    /// The pairwise feature vector `C(f_Q(q), f_P(p))`.
    pub fn compose(&self, p: &PassageFeatures<S>) -> SparseVector<S> {
        let mut out = &self.wh_lat.cartesian(&p.ne_types) + &self.wh_lat.cartesian(&p.bow);
        out = &out + &self.named_entities.join(&p.named_entities);
        out = &out + &self.tfidf.join(&p.bow);
        if !p.all_caps.is_empty() {
            out = &out + &self.wh_lat.cartesian(&p.all_caps);
        }
        out
    }
}

/// Bundles corpus statistics and extractor settings for the QA task.
#[derive(Debug, Clone)]
pub struct QaFeaturizer {
    pub idf: IdfTable,
    pub terms: TermPolicy,
    pub all_caps: bool,
}

impl QaFeaturizer {
    pub fn new(idf: IdfTable) -> Self {
        Self {
            idf,
            terms: TermPolicy::default(),
            all_caps: false,
        }
    }

    pub fn with_all_caps(mut self, enabled: bool) -> Self {
        self.all_caps = enabled;
        self
    }

    pub fn with_terms(mut self, terms: TermPolicy) -> Self {
        self.terms = terms;
        self
    }

    pub fn question<S: Scalar>(&self, q: &AnnotatedText) -> QuestionFeatures<S> {
        QuestionFeatures {
            wh_lat: extract_qword::<S>(q).cartesian(&extract_lat(q)),
            named_entities: extract_named_entities(q),
            tfidf: extract_tfidf(q, &self.idf, &self.terms),
        }
    }

    pub fn passage<S: Scalar>(&self, p: &AnnotatedText) -> PassageFeatures<S> {
        PassageFeatures {
            ne_types: extract_ne_types(p),
            bow: extract_bow(p, &self.terms),
            named_entities: extract_named_entities(p),
            all_caps: if self.all_caps {
                extract_all_caps(p)
            } else {
                SparseVector::new()
            },
        }
    }

    /// `C(f_Q(q), f_P(p))`.
    pub fn compose<S: Scalar>(&self, q: &AnnotatedText, p: &AnnotatedText) -> SparseVector<S> {
        self.question::<S>(q).compose(&self.passage(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::Token;

    fn tagged(id: &str, words: &[(&str, Pos)]) -> AnnotatedText {
        AnnotatedText::new(
            id,
            words.iter().map(|(w, p)| Token::new(*w, Some(*p))).collect(),
            [],
        )
        .unwrap()
    }

    fn strs(v: &SparseVector<f64>) -> Vec<(String, f64)> {
        v.iter().map(|(f, w)| (f.as_str().to_string(), *w)).collect()
    }

    #[test]
    fn qword_examples() {
        let q = AnnotatedText::from_words("q", "How many siblings did she have ?");
        assert_eq!(strs(&extract_qword(&q)), vec![("qword:how many".into(), 1.0)]);
        let q = AnnotatedText::from_words("q", "Who wrote Hamlet ?");
        assert_eq!(strs(&extract_qword(&q)), vec![("qword:who".into(), 1.0)]);
        let q = AnnotatedText::from_words("q", "Name the capital of France .");
        assert_eq!(strs(&extract_qword(&q)), vec![("qword:other".into(), 1.0)]);
        let q = AnnotatedText::from_words("q", "How much did it cost ?");
        assert_eq!(strs(&extract_qword(&q)), vec![("qword:how much".into(), 1.0)]);
    }

    #[test]
    fn lat_examples() {
        use Pos::*;
        let q = tagged(
            "q",
            &[
                ("What", Other),
                ("is", Verb),
                ("the", Det),
                ("city", Noun),
                ("of", Adp),
                ("brotherly", Other),
                ("love", Noun),
                ("?", Other),
            ],
        );
        assert_eq!(strs(&extract_lat(&q)), vec![("lat:city".into(), 1.0)]);

        let q = tagged("q", &[("Who", Other), ("wrote", Verb), ("Hamlet", Noun), ("?", Other)]);
        assert_eq!(strs(&extract_lat(&q)), vec![("lat:∅".into(), 1.0)]);

        let q = tagged("q", &[("What", Other), ("happened", Verb), ("?", Other)]);
        assert_eq!(strs(&extract_lat(&q)), vec![("lat:∅".into(), 1.0)]);

        // Head of a noun run is its last token.
        let q = tagged(
            "q",
            &[("Which", Other), ("car", Noun), ("company", Noun), ("won", Verb), ("?", Other)],
        );
        assert_eq!(strs(&extract_lat(&q)), vec![("lat:company".into(), 1.0)]);

        // Untagged questions get the empty LAT.
        let q = AnnotatedText::from_words("q", "What city is this ?");
        assert_eq!(strs(&extract_lat(&q)), vec![("lat:∅".into(), 1.0)]);
    }

    #[test]
    fn named_entity_examples() {
        let t = AnnotatedText::new(
            "p",
            vec![Token::new("Margaret", None), Token::new("Thatcher", None)],
            [(0, 2, "PERSON".into())],
        )
        .unwrap();
        assert_eq!(
            strs(&extract_named_entities(&t)),
            vec![("ne-person:Margaret Thatcher".into(), 1.0)]
        );
        assert!(extract_named_entities::<f64>(&AnnotatedText::from_words("p", "no ents")).is_empty());

        let t = AnnotatedText::new(
            "p",
            vec![Token::new("Egypt", None), Token::new("and", None), Token::new("Egypt", None)],
            [(0, 1, "GPE".into()), (2, 3, "GPE".into())],
        )
        .unwrap();
        assert_eq!(strs(&extract_named_entities(&t)), vec![("ne-gpe:Egypt".into(), 1.0)]);
    }

    #[test]
    fn tfidf_examples() {
        let docs: Vec<AnnotatedText> = ["dog cat", "dog", "author book", "bird"]
            .iter()
            .enumerate()
            .map(|(i, t)| AnnotatedText::from_words(i.to_string(), t))
            .collect();
        let policy = TermPolicy::default();
        let idf = IdfTable::from_documents(docs.iter().map(|d| d.tokens.as_slice()), &policy).unwrap();

        let q = AnnotatedText::from_words("q", "the dog ?");
        assert_eq!(strs(&extract_tfidf(&q, &idf, &policy)), vec![("word:dog".into(), 1.0)]);

        let q = AnnotatedText::from_words("q", "Who is the author of the book about the dog ?");
        let v: SparseVector<f64> = extract_tfidf(&q, &idf, &policy);
        assert!((v.l2_norm() - 1.0).abs() < 1e-12);
        assert!(*v.get(&feature("word", "author")).unwrap() > 0.0);

        let q = AnnotatedText::from_words("q", "the of ?");
        assert!(extract_tfidf::<f64>(&q, &idf, &policy).is_empty());
    }

    #[test]
    fn bow_examples() {
        let policy = TermPolicy::default();
        let p = AnnotatedText::from_words("p", "the dog saw the dog");
        assert_eq!(
            strs(&extract_bow(&p, &policy)),
            vec![("word:dog".into(), 1.0), ("word:saw".into(), 1.0)]
        );
        assert!(extract_bow::<f64>(&AnnotatedText::from_words("p", ""), &policy).is_empty());
        let p = AnnotatedText::from_words("p", "The LSE board");
        assert_eq!(
            strs(&extract_bow(&p, &policy)),
            vec![("word:board".into(), 1.0), ("word:lse".into(), 1.0)]
        );
    }

    #[test]
    fn ne_type_examples() {
        let toks: Vec<Token> = "Ann met Bob in Rome".split(' ').map(|w| Token::new(w, None)).collect();
        let p = AnnotatedText::new("p", toks.clone(), [(0, 1, "PERSON".into())]).unwrap();
        assert_eq!(strs(&extract_ne_types(&p)), vec![("ne-type:PERSON".into(), 1.0)]);
        let p = AnnotatedText::new("p", toks.clone(), []).unwrap();
        assert!(extract_ne_types::<f64>(&p).is_empty());
        let p = AnnotatedText::new(
            "p",
            toks,
            [(0, 1, "PERSON".into()), (2, 3, "PERSON".into()), (4, 5, "GPE".into())],
        )
        .unwrap();
        assert_eq!(
            strs(&extract_ne_types(&p)),
            vec![("ne-type:GPE".into(), 1.0), ("ne-type:PERSON".into(), 1.0)]
        );
    }

    #[test]
    fn all_caps_examples() {
        let p = AnnotatedText::from_words("p", "The London Stock Exchange ( LSE ) board");
        assert_eq!(strs(&extract_all_caps(&p)), vec![("allCaps:TRUE".into(), 1.0)]);
        assert!(extract_all_caps::<f64>(&AnnotatedText::from_words("p", "the dog barked")).is_empty());
        assert!(extract_all_caps::<f64>(&AnnotatedText::from_words("p", "A dog")).is_empty());
    }

    fn single_doc_idf(p: &AnnotatedText) -> IdfTable {
        IdfTable::from_documents([p.tokens.as_slice()], &TermPolicy::default()).unwrap()
    }

    #[test]
    fn compose_who_person() {
        let q = AnnotatedText::new(
            "q",
            vec![Token::new("Who", None), Token::new("is", None), Token::new("X", None), Token::new("?", None)],
            [(2, 3, "PERSON".into())],
        )
        .unwrap();
        let p = AnnotatedText::new(
            "p",
            vec![Token::new("X", None), Token::new("sings", None)],
            [(0, 1, "PERSON".into())],
        )
        .unwrap();
        let fz = QaFeaturizer::new(single_doc_idf(&p));
        let c: SparseVector<f64> = fz.compose(&q, &p);
        let t = feature("qword", "who");
        let lat = feature("lat", EMPTY_LAT);
        let ty = feature("ne-type", "PERSON");
        let key = Feature::cartesian(&Feature::cartesian(&t, &lat), &ty);
        assert_eq!(c.get(&key), Some(&1.0));
        let join: Feature = "ne-person~ne-person:1".parse().unwrap();
        assert_eq!(c.get(&join), Some(&1.0));
    }

    #[test]
    fn compose_without_overlap_is_wh_lat_bow_block() {
        let q = AnnotatedText::from_words("q", "Who painted clouds ?");
        let p = AnnotatedText::from_words("p", "rivers flow north");
        let fz = QaFeaturizer::new(single_doc_idf(&p));
        let qf = fz.question::<f64>(&q);
        let pf = fz.passage::<f64>(&p);
        assert_eq!(qf.compose(&pf), qf.wh_lat.cartesian(&pf.bow));
    }

    #[test]
    fn compose_fig1_question_has_continent_lat() {
        use Pos::*;
        let q = AnnotatedText::new(
            "q",
            [("What", Other), ("continent", Noun), ("is", Verb), ("Egypt", Noun), ("on", Adp), ("?", Other)]
                .iter()
                .map(|(w, p)| Token::new(*w, Some(*p)))
                .collect(),
            [(3, 4, "GPE".into())],
        )
        .unwrap();
        let p = AnnotatedText::new(
            "p",
            vec![Token::new("Egypt", None), Token::new("lies", None), Token::new("in", None), Token::new("Africa", None)],
            [(0, 1, "GPE".into()), (3, 4, "LOC".into())],
        )
        .unwrap();
        let fz = QaFeaturizer::new(single_doc_idf(&p));
        let c: SparseVector<f64> = fz.compose(&q, &p);
        assert!(c
            .features()
            .any(|f| f.as_str() == "(qword*lat)*ne-type:what|continent|LOC"));
    }

    #[test]
    fn passage_features_are_binary() {
        let p = AnnotatedText::new(
            "p",
            "Ann met THE BOARD in Rome".split(' ').map(|w| Token::new(w, None)).collect(),
            [(0, 1, "PERSON".into()), (5, 6, "GPE".into())],
        )
        .unwrap();
        let fz = QaFeaturizer::new(single_doc_idf(&p)).with_all_caps(true);
        let pf = fz.passage::<f64>(&p);
        for v in [&pf.ne_types, &pf.bow, &pf.named_entities, &pf.all_caps] {
            assert!(v.is_binary());
        }
        assert!(pf.candidate_vector().is_binary());
        assert_eq!(
            pf.candidate_vector().len(),
            pf.ne_types.len() + pf.bow.len() + pf.named_entities.len() + 1
        );
    }
}
