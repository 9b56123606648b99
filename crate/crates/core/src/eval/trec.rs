//! TREC qrels (`qid 0 docid rel`) and run (`qid Q0 docid rank score tag`) files.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("query {query}: document {doc} is judged twice")]
    DuplicateJudgment { query: String, doc: String },
    #[error("run for query {query}: {reason}")]
    InvalidRun { query: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Binary relevance judgments; absent pairs are unjudged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, bool>>,
}

impl Qrels {
    pub fn insert(&mut self, query: &str, doc: &str, relevant: bool) -> Result<(), EvalError> {
        let per_query = self.judgments.entry(query.to_string()).or_default();
        if per_query.insert(doc.to_string(), relevant).is_some() {
            return Err(EvalError::DuplicateJudgment {
                query: query.to_string(),
                doc: doc.to_string(),
            });
        }
        Ok(())
    }

    pub fn judgment(&self, query: &str, doc: &str) -> Option<bool> {
        self.judgments.get(query)?.get(doc).copied()
    }

    pub fn is_relevant(&self, query: &str, doc: &str) -> bool {
        self.judgment(query, doc) == Some(true)
    }

    pub fn judged(&self, query: &str) -> impl Iterator<Item = (&str, bool)> + '_ {
        self.judgments
            .get(query)
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, r)| (d.as_str(), *r)))
    }

    pub fn relevant_docs(&self, query: &str) -> Vec<&str> {
        self.judged(query).filter(|(_, r)| *r).map(|(d, _)| d).collect()
    }

    pub fn relevant_count(&self, query: &str) -> usize {
        self.judged(query).filter(|(_, r)| *r).count()
    }

    pub fn nonrelevant_count(&self, query: &str) -> usize {
        self.judged(query).filter(|(_, r)| !*r).count()
    }

    /// All judged queries, sorted.
    pub fn queries(&self) -> Vec<&str> {
        self.judgments.keys().map(String::as_str).collect()
    }

    /// Queries with at least one relevant document.
    pub fn evaluable_queries(&self) -> Vec<&str> {
        self.judgments
            .iter()
            .filter(|(_, m)| m.values().any(|r| *r))
            .map(|(q, _)| q.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut qrels = Qrels::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |reason: String| EvalError::Parse { line: i + 1, reason };
            let [query, _, doc, rel] = fields[..] else {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            };
            let relevant = match rel {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("relevance must be 0 or 1, found {other:?}"))),
            };
            qrels.insert(query, doc, relevant).map_err(|e| err(e.to_string()))?;
        }
        Ok(qrels)
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (query, docs) in &self.judgments {
            for (doc, relevant) in docs {
                writeln!(out, "{query} 0 {doc} {}", u8::from(*relevant))?;
            }
        }
        Ok(())
    }
}

/// Ranked results per query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunList {
    queries: BTreeMap<String, Vec<(String, f64)>>,
}

impl RunList {
    /// Adds a query's ranking, which must have distinct documents and
    /// non-increasing finite scores.
    pub fn push(&mut self, query: &str, ranked: Vec<(String, f64)>) -> Result<(), EvalError> {
        let invalid = |reason: String| EvalError::InvalidRun {
            query: query.to_string(),
            reason,
        };
        if self.queries.contains_key(query) {
            return Err(invalid("query appears twice".into()));
        }
        let mut seen = HashSet::new();
        for (i, (doc, score)) in ranked.iter().enumerate() {
            if !score.is_finite() {
                return Err(invalid(format!("score {score} for {doc} is not finite")));
            }
            if !seen.insert(doc.as_str()) {
                return Err(invalid(format!("document {doc} is ranked twice")));
            }
            if i > 0 && ranked[i - 1].1 < *score {
                return Err(invalid(format!("scores increase at rank {}", i + 1)));
            }
        }
        self.queries.insert(query.to_string(), ranked);
        Ok(())
    }

    /// Orders `scored` by descending score, ties keeping their input order.
    pub fn push_scored(&mut self, query: &str, mut scored: Vec<(String, f64)>) -> Result<(), EvalError> {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.push(query, scored)
    }

    pub fn ranked(&self, query: &str) -> &[(String, f64)] {
        self.queries.get(query).map_or(&[], Vec::as_slice)
    }

    pub fn ranked_ids(&self, query: &str) -> Vec<String> {
        self.ranked(query).iter().map(|(d, _)| d.clone()).collect()
    }

    pub fn queries(&self) -> Vec<&str> {
        self.queries.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Reads a run, ordering each query's lines by their rank field.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut rows: BTreeMap<String, Vec<(usize, String, f64, usize)>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |reason: String| EvalError::Parse { line: i + 1, reason };
            let [query, _, doc, rank, score, _tag] = fields[..] else {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            };
            let rank: usize = rank.parse().map_err(|_| err(format!("bad rank {rank:?}")))?;
            let score: f64 = score.parse().map_err(|_| err(format!("bad score {score:?}")))?;
            rows.entry(query.to_string())
                .or_default()
                .push((rank, doc.to_string(), score, i + 1));
        }
        let mut run = RunList::default();
        for (query, mut lines) in rows {
            lines.sort_by_key(|r| r.0);
            for (expected, (rank, _, _, line)) in lines.iter().enumerate() {
                if *rank != expected + 1 {
                    return Err(EvalError::Parse {
                        line: *line,
                        reason: format!("ranks for {query} are not contiguous from 1"),
                    });
                }
            }
            run.push(&query, lines.into_iter().map(|(_, d, s, _)| (d, s)).collect())?;
        }
        Ok(run)
    }

    pub fn write<W: Write>(&self, mut out: W, tag: &str) -> io::Result<()> {
        for (query, ranked) in &self.queries {
            for (i, (doc, score)) in ranked.iter().enumerate() {
                writeln!(out, "{query} Q0 {doc} {} {score} {tag}", i + 1)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{bpref, mean_average_precision, mrr, recall_at_k};
    use proptest::prelude::*;

    #[test]
    fn qrels_round_trip_and_errors() {
        let text = "q1 0 d1 1\nq1 0 d2 0\n\nq2 0 d9 1\n";
        let qrels = Qrels::read(text.as_bytes()).unwrap();
        assert_eq!(qrels.len(), 3);
        let mut out = Vec::new();
        qrels.write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text.replace("\n\n", "\n"));

        assert!(matches!(
            Qrels::read("q1 0 d1 2\n".as_bytes()),
            Err(EvalError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Qrels::read("q1 0 d1 1\nq1 0 d1 0\n".as_bytes()),
            Err(EvalError::Parse { line: 2, .. })
        ));
        assert!(Qrels::read("q1 d1 1\n".as_bytes()).is_err());
    }

    #[test]
    fn run_round_trip_and_errors() {
        let text = "a Q0 x 1 2.5 t\na Q0 y 2 -1 t\nb Q0 z 1 0.125 t\n";
        let run = RunList::read(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        run.write(&mut out, "t").unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);

        let shuffled = "a Q0 y 2 -1 t\na Q0 x 1 2.5 t\n";
        assert_eq!(RunList::read(shuffled.as_bytes()).unwrap().ranked_ids("a"), vec!["x", "y"]);
        assert!(RunList::read("a Q0 x 2 1 t\n".as_bytes()).is_err());
        assert!(RunList::read("a Q0 x 1 1 t\na Q0 y 2 3 t\n".as_bytes()).is_err());
        assert!(RunList::read("a Q0 x 1 1 t\na Q0 x 2 0 t\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn metrics_invariant_to_affine_scores(
            scores in prop::collection::vec(-100.0f64..100.0, 1..30),
            relevant in prop::collection::vec(any::<bool>(), 30),
            a in 0.01f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let mut qrels = Qrels::default();
            for (i, r) in relevant.iter().take(scores.len()).enumerate() {
                qrels.insert("q", &format!("d{i}"), *r).unwrap();
            }
            let docs = |f: &dyn Fn(f64) -> f64| -> RunList {
                let mut run = RunList::default();
                run.push_scored("q", scores.iter().enumerate().map(|(i, s)| (format!("d{i}"), f(*s))).collect()).unwrap();
                run
            };
            let (x, y) = (docs(&|s| s), docs(&|s| a * s + b));
            // Affine maps can merge nearly-equal scores; only compare when the order is unchanged.
            prop_assume!(x.ranked_ids("q") == y.ranked_ids("q"));
            prop_assert_eq!(mean_average_precision(&x, &qrels), mean_average_precision(&y, &qrels));
            prop_assert_eq!(mrr(&x, &qrels), mrr(&y, &qrels));
            prop_assert_eq!(bpref(&x, &qrels), bpref(&y, &qrels));
            prop_assert_eq!(recall_at_k(&x, &qrels, 5), recall_at_k(&y, &qrels, 5));
        }
    }
}
