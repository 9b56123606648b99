//! Retrieval metrics over TREC-style runs and relevance judgments.
//!
//! Conventions follow trec_eval: queries without any relevant judgment are
//! left out of every mean, unjudged documents count as nonrelevant except
//! inside bpref, which ignores them.

mod report;
mod trec;

pub use report::{evaluate_all, EvalReport};
pub use trec::{EvalError, Qrels, RunList};

/// Fraction of the relevant documents found in the first `k` results.
pub fn query_recall_at(ranked: &[String], qrels: &Qrels, query: &str, k: usize) -> f64 {
    let relevant = qrels.relevant_count(query);
    if relevant == 0 {
        return 0.0;
    }
    let found = ranked
        .iter()
        .take(k)
        .filter(|d| qrels.is_relevant(query, d))
        .count();
    found as f64 / relevant as f64
}

/// Mean of precision at each retrieved relevant document, over all relevant.
pub fn query_average_precision(ranked: &[String], qrels: &Qrels, query: &str) -> f64 {
    let relevant = qrels.relevant_count(query);
    if relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if qrels.is_relevant(query, d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant as f64
}

pub fn query_reciprocal_rank(ranked: &[String], qrels: &Qrels, query: &str) -> f64 {
    ranked
        .iter()
        .position(|d| qrels.is_relevant(query, d))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// bpref with the `min(R, N)` denominator; unjudged documents are skipped.
pub fn query_bpref(ranked: &[String], qrels: &Qrels, query: &str) -> f64 {
    let relevant = qrels.relevant_count(query);
    if relevant == 0 {
        return 0.0;
    }
    let nonrelevant = qrels.nonrelevant_count(query);
    let cap = relevant.min(nonrelevant);
    let mut nonrel_above = 0usize;
    let mut sum = 0.0;
    for d in ranked {
        match qrels.judgment(query, d) {
            Some(true) => {
                sum += if cap == 0 {
                    1.0
                } else {
                    1.0 - nonrel_above.min(cap) as f64 / cap as f64
                };
            }
            Some(false) => nonrel_above += 1,
            None => {}
        }
    }
    sum / relevant as f64
}

/// Averages a per-query metric over the evaluable queries of `qrels`.
/// Queries missing from the run score 0.
fn mean_over<F>(run: &RunList, qrels: &Qrels, metric: F) -> f64
where
    F: Fn(&[String], &str) -> f64,
{
    let queries = qrels.evaluable_queries();
    if queries.is_empty() {
        return 0.0;
    }
    let total: f64 = queries
        .iter()
        .map(|q| metric(run.ranked_ids(q).as_slice(), q))
        .sum();
    total / queries.len() as f64
}

pub fn recall_at_k(run: &RunList, qrels: &Qrels, k: usize) -> f64 {
    mean_over(run, qrels, |r, q| query_recall_at(r, qrels, q, k))
}

pub fn mean_average_precision(run: &RunList, qrels: &Qrels) -> f64 {
    mean_over(run, qrels, |r, q| query_average_precision(r, qrels, q))
}

pub fn mrr(run: &RunList, qrels: &Qrels) -> f64 {
    mean_over(run, qrels, |r, q| query_reciprocal_rank(r, qrels, q))
}

pub fn bpref(run: &RunList, qrels: &Qrels) -> f64 {
    mean_over(run, qrels, |r, q| query_bpref(r, qrels, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds a single-query fixture from a pattern such as "nrrnr":
    /// r relevant, n judged nonrelevant, u unjudged.
    fn fixture(pattern: &str, extra_relevant: usize, extra_nonrelevant: usize) -> (Vec<String>, Qrels) {
        let mut qrels = Qrels::default();
        let mut ranked = Vec::new();
        for (i, c) in pattern.chars().enumerate() {
            let doc = format!("d{i}");
            match c {
                'r' => qrels.insert("q", &doc, true).unwrap(),
                'n' => qrels.insert("q", &doc, false).unwrap(),
                _ => {}
            }
            ranked.push(doc);
        }
        for i in 0..extra_relevant {
            qrels.insert("q", &format!("missing-r{i}"), true).unwrap();
        }
        for i in 0..extra_nonrelevant {
            qrels.insert("q", &format!("missing-n{i}"), false).unwrap();
        }
        (ranked, qrels)
    }

    #[test]
    fn recall_examples() {
        let (r, q) = fixture("nrrnr", 1, 0);
        assert_eq!(query_recall_at(&r, &q, "q", 3), 0.5);
        let (r, q) = fixture("rr", 0, 0);
        assert_eq!(query_recall_at(&r, &q, "q", 10), 1.0);
        let (r, q) = fixture("rrnn", 2, 0);
        assert_eq!(query_recall_at(&r, &q, "q", 4), 0.5);
    }

    #[test]
    fn average_precision_examples() {
        let (r, q) = fixture("rnr", 0, 0);
        assert_eq!(query_average_precision(&r, &q, "q"), (1.0 + 2.0 / 3.0) / 2.0);
        let (r, q) = fixture("r", 0, 0);
        assert_eq!(query_average_precision(&r, &q, "q"), 1.0);
        let (r, q) = fixture("nn", 1, 0);
        assert_eq!(query_average_precision(&r, &q, "q"), 0.0);
    }

    #[test]
    fn reciprocal_rank_examples() {
        let (r, q) = fixture("nnr", 0, 0);
        assert_eq!(query_reciprocal_rank(&r, &q, "q"), 1.0 / 3.0);
        let (r, q) = fixture("nn", 1, 0);
        assert_eq!(query_reciprocal_rank(&r, &q, "q"), 0.0);

        let mut qrels = Qrels::default();
        qrels.insert("a", "x", true).unwrap();
        qrels.insert("b", "y", true).unwrap();
        let mut run = RunList::default();
        run.push("a", vec![("x".into(), 1.0)]).unwrap();
        run.push("b", vec![("z".into(), 2.0), ("y".into(), 1.0)]).unwrap();
        assert_eq!(mrr(&run, &qrels), 0.75);
    }

    #[test]
    fn bpref_examples() {
        let (r, q) = fixture("nrr", 0, 2);
        assert_eq!(query_bpref(&r, &q, "q"), 0.5);
        let (r, q) = fixture("rr", 0, 0);
        assert_eq!(query_bpref(&r, &q, "q"), 1.0);
        let (r, q) = fixture("ur", 0, 1);
        assert_eq!(query_bpref(&r, &q, "q"), 1.0);
    }

    #[test]
    fn queries_without_relevant_are_excluded() {
        let mut qrels = Qrels::default();
        qrels.insert("a", "x", true).unwrap();
        qrels.insert("b", "y", false).unwrap();
        let mut run = RunList::default();
        run.push("a", vec![("x".into(), 1.0)]).unwrap();
        assert_eq!(mean_average_precision(&run, &qrels), 1.0);
        assert_eq!(qrels.evaluable_queries(), vec!["a"]);
    }

    fn arb_case() -> impl Strategy<Value = (String, usize, usize, usize)> {
        ("[rnu]{0,15}", 0usize..3, 0usize..3, 1usize..20)
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval((p, er, en, k) in arb_case()) {
            let (r, q) = fixture(&p, er, en);
            for v in [
                query_recall_at(&r, &q, "q", k),
                query_average_precision(&r, &q, "q"),
                query_reciprocal_rank(&r, &q, "q"),
                query_bpref(&r, &q, "q"),
            ] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn recall_monotone_in_k((p, er, en, k) in arb_case()) {
            let (r, q) = fixture(&p, er, en);
            prop_assert!(query_recall_at(&r, &q, "q", k) <= query_recall_at(&r, &q, "q", k + 1));
        }

        #[test]
        fn appending_nonrelevant_never_hurts((p, er, en, k) in arb_case(), tail in 0usize..5) {
            let (mut r, mut q) = fixture(&p, er, en);
            let tail_docs: Vec<String> = (0..tail).map(|i| format!("tail{i}")).collect();
            for doc in &tail_docs {
                q.insert("q", doc, false).unwrap();
            }
            let all = |r: &[String]| [
                query_recall_at(r, &q, "q", k),
                query_average_precision(r, &q, "q"),
                query_reciprocal_rank(r, &q, "q"),
                query_bpref(r, &q, "q"),
            ];
            let before = all(&r);
            r.extend(tail_docs);
            let after = all(&r);
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(a >= b);
            }
        }
    }
}
