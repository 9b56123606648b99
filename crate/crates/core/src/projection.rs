//! Projection of query-side features through a trained pairwise model.
//!
//! Scoring a candidate with the pairwise model, `θ · C(q, p)`, equals the
//! inner product of a projected query `t(q)` with the candidate's own binary
//! feature vector. That turns ranking into sparse inner product search:
//!
//! ```text
//! t⊗(f) = Σ_{(k=v, w) ∈ f} Σ_{k',v'} w·θ[(k,k')=(v,v')] · (k'=v')
//! t⋈(f) = Σ_{(k=v, w) ∈ f} Σ_{k'}    w·θ[(k=k')=1]      · (k'=v)
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use crate::extract::coref::{overall, Mention};
use crate::extract::{AnnotatedText, QaFeaturizer, QuestionFeatures};
use crate::feature::{Feature, FeatureKey, SparseVector};
use crate::model::LinearModel;
use crate::scalar::{Scalar, Weight};

/// Reverse index over the composed weights of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionTables<S> {
    cart: HashMap<Feature, Vec<(Feature, S)>>,
    join: HashMap<Arc<FeatureKey>, Vec<(Arc<FeatureKey>, S)>>,
}

impl<S> Default for ProjectionTables<S> {
    fn default() -> Self {
        Self {
            cart: HashMap::new(),
            join: HashMap::new(),
        }
    }
}

impl<S: Weight> ProjectionTables<S> {
    /// Indexes every Cartesian weight under its left component and every
    /// join weight under its left key. Plain weights are ignored.
    pub fn build(model: &LinearModel<S>) -> Self {
        let mut tables = Self::default();
        for (feature, weight) in model.weights().iter() {
            match &**feature.key() {
                FeatureKey::Cart(..) => {
                    let (left, right) = feature.split_cartesian().expect("Cartesian key");
                    tables
                        .cart
                        .entry(left)
                        .or_default()
                        .push((right, weight.clone()));
                }
                FeatureKey::Join(left, right) => {
                    tables
                        .join
                        .entry(Arc::clone(left))
                        .or_default()
                        .push((Arc::clone(right), weight.clone()));
                }
                FeatureKey::Ns(_) => {}
            }
        }
        tables
    }

    /// Like [`Self::build`] but keeps only the `m` largest-magnitude
    /// expansions per input feature. Projection is then no longer exact.
    pub fn build_truncated(model: &LinearModel<S>, m: usize) -> Self {
        let mut tables = Self::build(model);
        let by_magnitude = |a: &S, b: &S| {
            let abs = |x: &S| if *x < S::zero() { -x.clone() } else { x.clone() };
            abs(b)
                .partial_cmp(&abs(a))
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        for list in tables.cart.values_mut() {
            list.sort_by(|a, b| by_magnitude(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
            list.truncate(m);
        }
        for list in tables.join.values_mut() {
            list.sort_by(|a, b| by_magnitude(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
            list.truncate(m);
        }
        tables
    }

    pub fn cartesian_entries(&self, left: &Feature) -> &[(Feature, S)] {
        self.cart.get(left).map_or(&[], Vec::as_slice)
    }

    pub fn join_entries(&self, left: &FeatureKey) -> &[(Arc<FeatureKey>, S)] {
        self.join.get(left).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.cart.is_empty() && self.join.is_empty()
    }

    /// Number of model weights indexed.
    pub fn len(&self) -> usize {
        self.cart.values().map(Vec::len).sum::<usize>() + self.join.values().map(Vec::len).sum::<usize>()
    }

    /// `t⊗(f)`: collisions accumulate.
    pub fn project_cartesian(&self, f: &SparseVector<S>) -> SparseVector<S> {
        let mut out = Vec::new();
        for (feature, w) in f.iter() {
            for (right, theta) in self.cartesian_entries(feature) {
                out.push((right.clone(), w.clone() * theta.clone()));
            }
        }
        SparseVector::from_entries(out)
    }

    /// `t⋈(f)`: each value is carried to every joined key of matching arity.
    pub fn project_join(&self, f: &SparseVector<S>) -> SparseVector<S> {
        let mut out = Vec::new();
        for (feature, w) in f.iter() {
            for (right, theta) in self.join_entries(feature.key()) {
                if let Ok(target) = Feature::from_parts(Arc::clone(right), Arc::clone(feature.value())) {
                    out.push((target, w.clone() * theta.clone()));
                }
            }
        }
        SparseVector::from_entries(out)
    }

    /// `t(q) = t⊗(f_wh ⊗ f_lat) + t⋈(f_NE + f_TfIdf)`.
    pub fn project_question(&self, q: &QuestionFeatures<S>) -> SparseVector<S> {
        let joined = &q.named_entities + &q.tfidf;
        &self.project_cartesian(&q.wh_lat) + &self.project_join(&joined)
    }

    /// `t⋈(f_overall(m))`.
    pub fn project_mention(&self, m: &Mention) -> SparseVector<S> {
        self.project_join(&overall(m))
    }
}

/// Projects a raw question into its weighted candidate-side query.
pub fn project_qa_query<S: Scalar>(
    tables: &ProjectionTables<S>,
    featurizer: &QaFeaturizer,
    q: &AnnotatedText,
) -> SparseVector<S> {
    tables.project_question(&featurizer.question(q))
}

pub fn project_coref_query<S: Weight>(tables: &ProjectionTables<S>, m: &Mention) -> SparseVector<S> {
    tables.project_mention(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{IdfTable, Pos, TermPolicy, Token};
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn feat(s: &str) -> Feature {
        s.parse().unwrap()
    }

    fn model(items: &[(&str, f64)]) -> LinearModel<f64> {
        LinearModel::from_weights(items.iter().map(|(f, w)| (feat(f), *w)).collect())
    }

    fn vector(items: &[(&str, f64)]) -> SparseVector<f64> {
        items.iter().map(|(f, w)| (feat(f), *w)).collect()
    }

    #[test]
    fn build_examples() {
        let t = ProjectionTables::build(&model(&[("qword*ne-type:who|PERSON", 2.0)]));
        assert_eq!(
            t.cartesian_entries(&feat("qword:who")),
            &[(feat("ne-type:PERSON"), 2.0)]
        );
        let t = ProjectionTables::build(&model(&[("ne-gpe~ne-gpe:1", 1.5)]));
        let key: FeatureKey = "ne-gpe".parse().unwrap();
        assert_eq!(t.join_entries(&key)[0].1, 1.5);
        assert_eq!(t.join_entries(&key)[0].0.to_string(), "ne-gpe");
        assert!(ProjectionTables::build(&model(&[("word:dog", 1.0)])).is_empty());
    }

    #[test]
    fn rebuilding_is_stable() {
        let m = model(&[("a*b:x|y", 1.0), ("a*b:x|z", -2.0), ("a~b:1", 0.5)]);
        assert_eq!(ProjectionTables::build(&m), ProjectionTables::build(&m));
        assert_eq!(ProjectionTables::build(&m).len(), 3);
    }

    #[test]
    fn cartesian_examples() {
        let t = ProjectionTables::build(&model(&[("qword*ne-type:who|PERSON", 2.0)]));
        assert_eq!(
            t.project_cartesian(&vector(&[("qword:who", 1.0)])),
            vector(&[("ne-type:PERSON", 2.0)])
        );
        assert!(t.project_cartesian(&vector(&[("qword:what", 1.0)])).is_empty());
    }

    #[test]
    fn join_examples() {
        let t = ProjectionTables::build(&model(&[("ne-gpe~ne-gpe:1", 1.5)]));
        let out = t.project_join(&vector(&[("ne-gpe:Egypt", 0.8)]));
        assert!((out.get(&feat("ne-gpe:Egypt")).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(out.len(), 1);

        let t = ProjectionTables::build(&model(&[("ne-norp~ne-language:1", 1.0)]));
        assert_eq!(
            t.project_join(&vector(&[("ne-norp:French", 1.0)])),
            vector(&[("ne-language:French", 1.0)])
        );
        assert!(t.project_join(&SparseVector::new()).is_empty());
    }

    #[test]
    fn join_skips_arity_mismatch() {
        let t = ProjectionTables::build(&model(&[("word~(a*b):1", 1.0)]));
        assert!(t.project_join(&vector(&[("word:x", 1.0)])).is_empty());
    }

    #[test]
    fn truncation_keeps_largest() {
        let m = model(&[("a*b:x|1", 0.1), ("a*b:x|2", -3.0), ("a*b:x|3", 2.0)]);
        let t = ProjectionTables::build_truncated(&m, 2);
        let out = t.project_cartesian(&vector(&[("a:x", 1.0)]));
        assert_eq!(out, vector(&[("b:2", -3.0), ("b:3", 2.0)]));
    }

    fn egypt_question() -> AnnotatedText {
        let words = [
            ("What", Pos::Other),
            ("continent", Pos::Noun),
            ("is", Pos::Verb),
            ("Egypt", Pos::Noun),
            ("on", Pos::Adp),
            ("?", Pos::Other),
        ];
        let tokens = words.iter().map(|(w, p)| Token::new(*w, Some(*p))).collect();
        AnnotatedText::new("q", tokens, vec![(3, 4, "GPE".into())]).unwrap()
    }

    fn featurizer() -> QaFeaturizer {
        let docs = [
            vec![Token::new("Egypt", None), Token::new("Africa", None)],
            vec![Token::new("continent", None)],
            vec![Token::new("Paris", None)],
        ];
        let idf = IdfTable::from_documents(docs.iter().map(Vec::as_slice), &TermPolicy::default()).unwrap();
        QaFeaturizer::new(idf)
    }

    #[test]
    fn qa_query_namespaces() {
        let m = model(&[
            ("(qword*lat)*ne-type:what|continent|LOC", 1.3),
            ("ne-gpe~ne-gpe:1", 0.7),
            ("word~word:1", 1.0),
        ]);
        let t = ProjectionTables::build(&m);
        let q: SparseVector<f64> = project_qa_query(&t, &featurizer(), &egypt_question());
        let namespaces: Vec<&str> = q.features().filter_map(Feature::namespace).collect();
        assert!(namespaces.contains(&"ne-type"));
        assert!(namespaces.contains(&"ne-gpe"));
        assert!(namespaces.contains(&"word"));
        assert!(q.contains(&feat("ne-gpe:Egypt")));

        let empty: SparseVector<f64> =
            project_qa_query(&ProjectionTables::default(), &featurizer(), &egypt_question());
        assert!(empty.is_empty());
    }

    #[test]
    fn word_join_only_model_is_scaled_tfidf() {
        let fz = featurizer();
        let t = ProjectionTables::build(&model(&[("word~word:1", 2.5)]));
        let q: SparseVector<f64> = project_qa_query(&t, &fz, &egypt_question());
        let tfidf = fz.question::<f64>(&egypt_question()).tfidf;
        assert_eq!(q, tfidf.scale(2.5));
    }

    fn tehran() -> Mention {
        Mention::new("m", "Tehran", "GPE", "d", vec![("iran".into(), 1.0)]).unwrap()
    }

    #[test]
    fn coref_examples() {
        let m = tehran();
        let all: std::collections::BTreeSet<String> = overall::<f64>(&m)
            .features()
            .map(|f| {
                let k = f.key().to_string();
                let child = if f.key().is_plain() { k } else { format!("({k})") };
                format!("{child}~{child}:1")
            })
            .collect();
        let identity = LinearModel::from_weights(all.iter().map(|f| (feat(f), 1.0)).collect());
        let t = ProjectionTables::build(&identity);
        assert_eq!(project_coref_query(&t, &m), overall::<f64>(&m));
        assert!(project_coref_query::<f64>(&ProjectionTables::default(), &m).is_empty());

        let t = ProjectionTables::build(&model(&[("(type*l3g)~(type*l3g):1", 2.0)]));
        let q = project_coref_query(&t, &m);
        assert_eq!(q.len(), 4);
        assert!(q.iter().all(|(f, w)| *w == 2.0 && f.as_str().starts_with("type*l3g:GPE|")));
    }

    type Q = Ratio<i64>;

    fn small_features(max: usize) -> impl Strategy<Value = Vec<(u8, u8, i64)>> {
        prop::collection::vec((0u8..3, 0u8..4, -6i64..=6), 0..max)
    }

    fn plain(ns: u8, v: u8) -> Feature {
        Feature::new(&format!("n{ns}"), &format!("v{v}")).unwrap()
    }

    fn exact_vector(items: &[(u8, u8, i64)]) -> SparseVector<Q> {
        items
            .iter()
            .map(|&(n, v, w)| (plain(n, v), Q::new(w, 3)))
            .collect()
    }

    fn binary_vector(items: &[(u8, u8, i64)]) -> SparseVector<Q> {
        SparseVector::binary(items.iter().map(|&(n, v, _)| plain(n, v)))
    }

    fn exact_model(f: &[(u8, u8, i64)], g: &[(u8, u8, i64)], theta: &[i64]) -> LinearModel<Q> {
        let mut entries = Vec::new();
        let mut it = theta.iter().cycle();
        for &(n1, v1, _) in f {
            for &(n2, v2, _) in g {
                entries.push((Feature::cartesian(&plain(n1, v1), &plain(n2, v2)), Q::new(*it.next().unwrap(), 7)));
            }
        }
        for n1 in 0..3u8 {
            for n2 in 0..3u8 {
                let (l, r) = (plain(n1, 0), plain(n2, 0));
                entries.push((Feature::join_of(l.key(), r.key()), Q::new(*it.next().unwrap(), 5)));
            }
        }
        LinearModel::from_weights(SparseVector::from_entries(entries))
    }

    proptest! {
        #[test]
        fn cartesian_identity_is_exact(
            f in small_features(8),
            g in small_features(8),
            theta in prop::collection::vec(-9i64..=9, 1..20),
        ) {
            let m = exact_model(&f, &g, &theta);
            let t = ProjectionTables::build(&m);
            let (fv, gv) = (exact_vector(&f), exact_vector(&g));
            prop_assert_eq!(t.project_cartesian(&fv).dot(&gv), m.score(&fv.cartesian(&gv)));
        }

        #[test]
        fn join_identity_is_exact(
            f in small_features(8),
            g in small_features(8),
            theta in prop::collection::vec(-9i64..=9, 1..20),
        ) {
            let m = exact_model(&f, &g, &theta);
            let t = ProjectionTables::build(&m);
            let (fv, gv) = (exact_vector(&f), binary_vector(&g));
            prop_assert_eq!(t.project_join(&fv).dot(&gv), m.score(&fv.join(&gv)));
        }

        #[test]
        fn support_bounded_by_fan_out(
            f in small_features(8),
            g in small_features(8),
            theta in prop::collection::vec(-9i64..=9, 1..20),
        ) {
            let m = exact_model(&f, &g, &theta);
            let t = ProjectionTables::build(&m);
            let fv = exact_vector(&f);
            let fan_out: usize = fv.features().map(|x| t.cartesian_entries(x).len()).sum();
            prop_assert!(t.project_cartesian(&fv).len() <= fan_out);
            let fan_out: usize = fv.features().map(|x| t.join_entries(x.key()).len()).sum();
            prop_assert!(t.project_join(&fv).len() <= fan_out);
        }
    }
}
