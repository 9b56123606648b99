//! End-to-end glue: candidates, training pairs, tuning, projected search.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{self, CorpusError, CorpusRecord, RecordKind};
use crate::eval::{evaluate_all, mean_average_precision, EvalError, EvalReport, Qrels, RunList};
use crate::extract::{IdfError, Mention, PassageFeatures, QaFeaturizer, QuestionFeatures, TermPolicy};
use crate::feature::{Feature, SparseVector};
use crate::index::{IndexError, InvertedIndex};
use crate::model::{
    derive_seed, tune_lambda, undersample_negatives, Label, LambdaEvaluation, LinearModel, SampleError,
    TrainConfig, TrainError, TrainingInstance, DEFAULT_LAMBDA_GRID,
};
use crate::projection::ProjectionTables;
use crate::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Qa,
    Coref,
}

impl Task {
    /// 1000 for QA, 10000 for coreference.
    pub fn default_k(self) -> usize {
        match self {
            Task::Qa => 1000,
            Task::Coref => 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub task: Task,
    pub all_caps: bool,
    pub max_iters: usize,
    pub tolerance: f64,
    pub grid: Vec<f64>,
    pub k: usize,
    pub neg_per_query: usize,
    pub seed: u64,
    pub eval_ks: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            task: Task::Qa,
            all_caps: false,
            max_iters: TrainConfig::default().max_iters,
            tolerance: TrainConfig::default().tolerance,
            grid: DEFAULT_LAMBDA_GRID.to_vec(),
            k: Task::Qa.default_k(),
            neg_per_query: 50,
            seed: 0,
            eval_ks: vec![10, 100, 1000],
        }
    }
}

impl PipelineConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let finite = self.tolerance.is_finite() && self.grid.iter().all(|l| l.is_finite() && *l >= 0.0);
        if !finite || self.grid.is_empty() || self.k == 0 {
            return Err(PipelineError::Config(
                "grid must be nonempty and finite, tolerance finite, k ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("qrels for query {query} reference unknown document {doc}")]
    UnknownDocument { query: String, doc: String },
    #[error("query {query}: {source}")]
    Sample { query: String, source: SampleError },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Idf(#[from] IdfError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A retrieval task: binary candidate vectors, a pairwise composition and
/// the matching query projection.
pub trait RetrievalTask: Sync {
    type Query: Sync;

    fn candidate_ids(&self) -> &[String];
    fn candidate_vector(&self, ordinal: usize) -> SparseVector<f64>;
    fn compose(&self, query: &Self::Query, ordinal: usize) -> SparseVector<f64>;
    fn project(&self, tables: &ProjectionTables<f64>, query: &Self::Query) -> SparseVector<f64>;
}

/// Passages as candidates for questions.
pub struct QaTask {
    pub featurizer: QaFeaturizer,
    ids: Vec<String>,
    passages: Vec<PassageFeatures<f64>>,
}

impl QaTask {
    pub fn new(featurizer: QaFeaturizer, records: &[CorpusRecord]) -> Result<Self, PipelineError> {
        let texts = records
            .iter()
            .map(|r| r.to_annotated())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CorpusError::from)?;
        let passages = texts.par_iter().map(|t| featurizer.passage(t)).collect();
        Ok(Self {
            featurizer,
            ids: records.iter().map(|r| r.id.clone()).collect(),
            passages,
        })
    }

    /// Computes corpus statistics from the passage records themselves.
    pub fn from_passages(records: &[CorpusRecord], terms: TermPolicy, all_caps: bool) -> Result<Self, PipelineError> {
        let idf = corpus::compute_corpus_stats(records, &terms)?;
        let featurizer = QaFeaturizer::new(idf).with_terms(terms).with_all_caps(all_caps);
        Self::new(featurizer, records)
    }

    pub fn questions(&self, records: &[CorpusRecord]) -> Result<Vec<(String, QuestionFeatures<f64>)>, PipelineError> {
        records
            .iter()
            .filter(|r| r.kind == RecordKind::Question)
            .map(|r| {
                let text = r.to_annotated().map_err(CorpusError::from)?;
                Ok((r.id.clone(), self.featurizer.question(&text)))
            })
            .collect()
    }
}

impl RetrievalTask for QaTask {
    type Query = QuestionFeatures<f64>;

    fn candidate_ids(&self) -> &[String] {
        &self.ids
    }

    fn candidate_vector(&self, ordinal: usize) -> SparseVector<f64> {
        self.passages[ordinal].candidate_vector()
    }

    fn compose(&self, query: &Self::Query, ordinal: usize) -> SparseVector<f64> {
        query.compose(&self.passages[ordinal])
    }

    fn project(&self, tables: &ProjectionTables<f64>, query: &Self::Query) -> SparseVector<f64> {
        tables.project_question(query)
    }
}

/// Mentions as candidates for mentions.
pub struct CorefTask {
    ids: Vec<String>,
    overall: Vec<SparseVector<f64>>,
}

impl CorefTask {
    pub fn new(mentions: &[Mention]) -> Self {
        Self {
            ids: mentions.iter().map(|m| m.id.clone()).collect(),
            overall: mentions.par_iter().map(crate::extract::coref::overall).collect(),
        }
    }

    pub fn queries(mentions: &[Mention]) -> Vec<(String, Mention)> {
        mentions.iter().map(|m| (m.id.clone(), m.clone())).collect()
    }
}

impl RetrievalTask for CorefTask {
    type Query = Mention;

    fn candidate_ids(&self) -> &[String] {
        &self.ids
    }

    fn candidate_vector(&self, ordinal: usize) -> SparseVector<f64> {
        self.overall[ordinal].clone()
    }

    fn compose(&self, query: &Self::Query, ordinal: usize) -> SparseVector<f64> {
        crate::extract::coref::overall::<f64>(query).join(&self.overall[ordinal])
    }

    fn project(&self, tables: &ProjectionTables<f64>, query: &Self::Query) -> SparseVector<f64> {
        tables.project_mention(query)
    }
}

pub fn build_task_index<T: RetrievalTask>(task: &T) -> Result<InvertedIndex, PipelineError> {
    let ids = task.candidate_ids();
    Ok(InvertedIndex::build(
        (0..ids.len()).map(|i| (ids[i].as_str(), task.candidate_vector(i))),
    )?)
}

/// The tf-idf-only model: a single unit weight on word-to-word joins.
pub fn baseline_model() -> LinearModel<f64> {
    let word = Feature::new("word", "x").expect("valid namespace");
    let key = Feature::join_of(word.key(), word.key());
    LinearModel::from_weights(SparseVector::singleton(key, 1.0))
}

/// One instance per judged pair plus `neg_per_query` sampled negatives per
/// query. Queries without judgments are skipped.
pub fn make_training_pairs<T: RetrievalTask>(
    task: &T,
    queries: &[(String, T::Query)],
    qrels: &Qrels,
    neg_per_query: usize,
    seed: u64,
) -> Result<Vec<TrainingInstance<f64>>, PipelineError> {
    let ordinals: HashMap<&str, usize> = task
        .candidate_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let per_query: Vec<Result<Vec<TrainingInstance<f64>>, PipelineError>> = queries
        .par_iter()
        .enumerate()
        .map(|(qi, (qid, query))| {
            let mut judged: Vec<(usize, bool)> = Vec::new();
            for (doc, relevant) in qrels.judged(qid) {
                let ordinal = *ordinals.get(doc).ok_or_else(|| PipelineError::UnknownDocument {
                    query: qid.clone(),
                    doc: doc.to_string(),
                })?;
                judged.push((ordinal, relevant));
            }
            if judged.is_empty() {
                return Ok(Vec::new());
            }
            // Judged documents already appear once; keep them out of the pool.
            let exclude: HashSet<&str> = qrels.judged(qid).map(|(d, _)| d).collect();
            let negatives = undersample_negatives(
                task.candidate_ids(),
                &exclude,
                neg_per_query,
                derive_seed(seed, qi as u64),
            )
            .map_err(|source| PipelineError::Sample {
                query: qid.clone(),
                source,
            })?;
            let sampled = negatives.into_iter().map(|d| (ordinals[d], false));
            Ok(judged
                .into_iter()
                .chain(sampled)
                .map(|(ordinal, relevant)| TrainingInstance {
                    features: task.compose(query, ordinal),
                    label: if relevant { Label::Relevant } else { Label::Irrelevant },
                    query_id: qid.clone(),
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_query {
        out.extend(r?);
    }
    let skipped = queries.iter().filter(|(q, _)| qrels.judged(q).next().is_none()).count();
    if skipped > 0 {
        log::warn!("{skipped} queries have no judgments and contribute no training pairs");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SearchSummary {
    pub queries: usize,
    pub mean_docs_scored: f64,
    pub mean_postings_touched: f64,
    pub mean_query_features: f64,
}

/// Projects every query through `model` and retrieves the top `k`.
/// Queries run in parallel; the run is ordered by query id regardless.
pub fn search_queries<T: RetrievalTask>(
    task: &T,
    index: &InvertedIndex,
    model: &LinearModel<f64>,
    queries: &[(String, T::Query)],
    k: usize,
) -> Result<(RunList, SearchSummary), PipelineError> {
    let tables = ProjectionTables::build(model);
    let results: Vec<_> = queries
        .par_iter()
        .map(|(qid, query)| {
            let projected = task.project(&tables, query);
            let result = index.search(&projected, k)?;
            Ok((qid, projected.len(), result))
        })
        .collect::<Result<_, IndexError>>()?;
    let mut run = RunList::default();
    let mut summary = SearchSummary {
        queries: results.len(),
        ..SearchSummary::default()
    };
    for (qid, features, result) in results {
        summary.mean_docs_scored += result.stats.docs_scored as f64;
        summary.mean_postings_touched += result.stats.postings_touched as f64;
        summary.mean_query_features += features as f64;
        run.push(qid, result.hits.into_iter().map(|h| (h.doc_id, h.score)).collect())?;
    }
    if summary.queries > 0 {
        let n = summary.queries as f64;
        summary.mean_docs_scored /= n;
        summary.mean_postings_touched /= n;
        summary.mean_query_features /= n;
    }
    Ok((run, summary))
}

pub struct Trained {
    pub lambda: f64,
    pub model: LinearModel<f64>,
    pub evaluations: Vec<LambdaEvaluation>,
}

/// Trains on `train_queries` and picks λ by dev MAP from projected search.
#[allow(clippy::too_many_arguments)]
pub fn train_and_tune<T: RetrievalTask>(
    task: &T,
    index: &InvertedIndex,
    train_queries: &[(String, T::Query)],
    train_qrels: &Qrels,
    dev_queries: &[(String, T::Query)],
    dev_qrels: &Qrels,
    config: &PipelineConfig,
) -> Result<Trained, PipelineError> {
    config.validate()?;
    let instances = make_training_pairs(task, train_queries, train_qrels, config.neg_per_query, config.seed)?;
    log::info!("training on {} instances", instances.len());
    let evaluate = |m: &LinearModel<f64>| match search_queries(task, index, m, dev_queries, config.k) {
        Ok((run, _)) => mean_average_precision(&run, dev_qrels),
        Err(e) => {
            log::error!("dev evaluation failed: {e}");
            0.0
        }
    };
    let tuned = tune_lambda(&config.grid, &instances, &config.train_config(), evaluate)?;
    log::info!(
        "selected lambda={} with {} nonzero weights",
        tuned.lambda,
        tuned.model.nonzero_count()
    );
    Ok(Trained {
        lambda: tuned.lambda,
        model: tuned.model,
        evaluations: tuned.evaluations,
    })
}

/// Everything one QA experiment over a synthetic directory produces.
pub struct Experiment {
    pub config: PipelineConfig,
    pub trained: Trained,
    pub run: RunList,
    pub report: EvalReport,
    pub summary: SearchSummary,
    pub baseline_run: RunList,
    pub baseline_report: EvalReport,
    pub doc_count: usize,
}

fn load_split(dir: &Path, split: &str) -> Result<(Vec<CorpusRecord>, Qrels), PipelineError> {
    let questions = corpus::load_corpus(dir.join(synth::questions_file(split)))?;
    let qrels = Qrels::read(io::BufReader::new(File::open(dir.join(synth::qrels_file(split)))?))?;
    Ok((questions, qrels))
}

/// Train on the train split, tune on dev, and evaluate on test, next to the
/// tf-idf baseline.
pub fn run_qa_experiment(data_dir: &Path, config: &PipelineConfig) -> Result<Experiment, PipelineError> {
    config.validate()?;
    log::info!("config {}", serde_json::to_string(config).unwrap_or_default());
    let passages = corpus::load_corpus(data_dir.join(synth::CORPUS_FILE))?;
    let task = QaTask::from_passages(&passages, TermPolicy::default(), config.all_caps)?;
    let index = build_task_index(&task)?;
    let (train_q, train_qrels) = load_split(data_dir, "train")?;
    let (dev_q, dev_qrels) = load_split(data_dir, "dev")?;
    let (test_q, test_qrels) = load_split(data_dir, "test")?;
    let (train_q, dev_q, test_q) = (task.questions(&train_q)?, task.questions(&dev_q)?, task.questions(&test_q)?);

    let trained = train_and_tune(&task, &index, &train_q, &train_qrels, &dev_q, &dev_qrels, config)?;
    let (run, summary) = search_queries(&task, &index, &trained.model, &test_q, config.k)?;
    let report = evaluate_all(&run, &test_qrels, &config.eval_ks);
    let (baseline_run, _) = search_queries(&task, &index, &baseline_model(), &test_q, config.k)?;
    let baseline_report = evaluate_all(&baseline_run, &test_qrels, &config.eval_ks);
    Ok(Experiment {
        config: config.clone(),
        trained,
        run,
        report,
        summary,
        baseline_run,
        baseline_report,
        doc_count: index.doc_count(),
    })
}

pub const MODEL_FILE: &str = "model.txt";
pub const RUN_FILE: &str = "run.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const BASELINE_RUN_FILE: &str = "baseline.run.txt";
pub const BASELINE_REPORT_FILE: &str = "baseline.report.txt";

impl Experiment {
    /// Human-readable comparison with the baseline, plus the λ sweep.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("lambda {} ({} weights)\n", self.trained.lambda, self.trained.model.nonzero_count()));
        for e in &self.trained.evaluations {
            out.push_str(&format!("  lambda {:<6} nonzero {:<6} dev MAP {:.4}\n", e.lambda, e.nonzero, e.map));
        }
        out.push_str("\ntrained model\n");
        out.push_str(&self.report.to_string());
        out.push_str("\ntf-idf baseline\n");
        out.push_str(&self.baseline_report.to_string());
        out
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut model = BufWriter::new(File::create(dir.join(MODEL_FILE))?);
        self.trained.model.write(&mut model)?;
        model.flush()?;
        let mut run = BufWriter::new(File::create(dir.join(RUN_FILE))?);
        self.run.write(&mut run, "disck")?;
        run.flush()?;
        fs::write(dir.join(REPORT_FILE), self.report.machine_lines())?;
        let mut base = BufWriter::new(File::create(dir.join(BASELINE_RUN_FILE))?);
        self.baseline_run.write(&mut base, "tfidf")?;
        base.flush()?;
        fs::write(dir.join(BASELINE_REPORT_FILE), self.baseline_report.machine_lines())?;
        Ok(())
    }
}
