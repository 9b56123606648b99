use std::fmt;

use serde::Serialize;

use super::{bpref, mean_average_precision, mrr, recall_at_k, Qrels, RunList};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// `(k, R@k)` in the order requested.
    pub recall: Vec<(usize, f64)>,
    pub map: f64,
    pub mrr: f64,
    pub bpref: f64,
    /// Queries with at least one relevant judgment.
    pub evaluated: usize,
    /// Judged queries with no relevant document, left out of every mean.
    pub excluded: usize,
    /// Evaluated queries the run has no results for (they score 0).
    pub missing_from_run: usize,
    /// Run queries that have no judgments at all.
    pub unjudged_in_run: usize,
    pub warnings: Vec<String>,
}

pub fn evaluate_all(run: &RunList, qrels: &Qrels, ks: &[usize]) -> EvalReport {
    let evaluable = qrels.evaluable_queries();
    let judged = qrels.queries();
    let excluded = judged.len() - evaluable.len();
    let missing_from_run = evaluable.iter().filter(|q| run.ranked(q).is_empty()).count();
    let unjudged_in_run = run
        .queries()
        .iter()
        .filter(|q| qrels.judged(q).next().is_none())
        .count();

    let mut warnings = Vec::new();
    if evaluable.is_empty() {
        warnings.push("no query has a relevant judgment; all metrics are 0".to_string());
    }
    if excluded > 0 {
        warnings.push(format!("{excluded} judged queries have no relevant document and are excluded"));
    }
    if missing_from_run > 0 {
        warnings.push(format!("{missing_from_run} evaluated queries have no results in the run"));
    }
    if unjudged_in_run > 0 {
        warnings.push(format!("{unjudged_in_run} run queries have no judgments and are ignored"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    EvalReport {
        recall: ks.iter().map(|&k| (k, recall_at_k(run, qrels, k))).collect(),
        map: mean_average_precision(run, qrels),
        mrr: mrr(run, qrels),
        bpref: bpref(run, qrels),
        evaluated: evaluable.len(),
        excluded,
        missing_from_run,
        unjudged_in_run,
        warnings,
    }
}

fn k_label(k: usize) -> String {
    if k >= 1000 && k.is_multiple_of(1000) {
        format!("R@{}k", k / 1000)
    } else {
        format!("R@{k}")
    }
}

impl EvalReport {
    fn rows(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self
            .recall
            .iter()
            .map(|&(k, v)| (k_label(k), v))
            .collect();
        rows.push(("bpref".into(), self.bpref));
        rows.push(("MAP".into(), self.map));
        rows.push(("MRR".into(), self.mrr));
        rows
    }

    /// `metric<TAB>all<TAB>value` lines in the style of trec_eval.
    pub fn machine_lines(&self) -> String {
        let mut out = format!("num_q\tall\t{}\n", self.evaluated);
        for (name, value) in self.rows() {
            out.push_str(&format!("{name}\tall\t{value}\n"));
        }
        out
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.rows().into_iter().find(|(n, _)| n == metric).map(|(_, v)| v)
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
        writeln!(f, "{:<width$}  {}", "queries", self.evaluated)?;
        for (name, value) in rows {
            writeln!(f, "{name:<width$}  {value:.4}")?;
        }
        if self.excluded > 0 {
            writeln!(f, "{:<width$}  {}", "excluded", self.excluded)?;
        }
        Ok(())
    }
}
