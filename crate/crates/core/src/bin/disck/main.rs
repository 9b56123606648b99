use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use disck::corpus::{self, CorpusRecord, RecordKind};
use disck::eval::{evaluate_all, Qrels, RunList};
use disck::extract::{IdfTable, Mention, QaFeaturizer, Stopwords, TermPolicy};
use disck::index::{load_index, save_index, InvertedIndex};
use disck::model::{LinearModel, DEFAULT_LAMBDA_GRID};
use disck::pipeline::{self, CorefTask, PipelineConfig, QaTask, RetrievalTask, Task};
use disck::synth::{synth_generate, SynthParams};

#[derive(Parser, Debug, Serialize)]
#[command(name = "disck", version, about = "Retrieve candidates for pairwise linear models with an inverted index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Index the candidate vectors of a corpus
    BuildIndex(BuildIndexArgs),
    /// Train a sparse model, choosing lambda by dev MAP
    Train(TrainArgs),
    /// Project queries through a model and search an index
    Search(SearchArgs),
    /// Score a run against qrels
    Eval(EvalArgs),
    /// Generate a synthetic question answering collection
    Synth(SynthArgs),
    /// Print index statistics
    Stats(StatsArgs),
    /// Train, search and evaluate on a synthetic collection, next to the tf-idf baseline
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TaskArg {
    Qa,
    Coref,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Qa => Task::Qa,
            TaskArg::Coref => Task::Coref,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ExtractArgs {
    /// Add the all-caps passage block
    #[arg(long)]
    all_caps: bool,
    /// Stopword list, one word per line (default: built-in English list)
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl ExtractArgs {
    fn policy(&self) -> Result<TermPolicy> {
        let stopwords = match &self.stopwords {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Stopwords::read(BufReader::new(file))?
            }
            None => Stopwords::builtin(),
        };
        Ok(TermPolicy::new(stopwords))
    }
}

#[derive(Args, Debug, Serialize)]
struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "qa")]
    task: TaskArg,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    extract: ExtractArgs,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    /// Candidate corpus (passages, or mentions and documents)
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "qa")]
    task: TaskArg,
    /// Training questions or query mentions
    #[arg(long)]
    queries: PathBuf,
    /// Judged training pairs
    #[arg(long, alias = "pairs")]
    qrels: PathBuf,
    #[arg(long)]
    dev_queries: PathBuf,
    #[arg(long, alias = "dev")]
    dev_qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    neg_per_query: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Retrieval depth for dev evaluation (default: 1000 for qa, 10000 for coref)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    extract: ExtractArgs,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum, default_value = "qa")]
    task: TaskArg,
    /// Result depth (default: 1000 for qa, 10000 for coref)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "disck")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    extract: ExtractArgs,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 100, 1000])]
    ks: Vec<usize>,
    /// trec_eval-style tab separated lines instead of a table
    #[arg(long)]
    machine: bool,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    num_queries: usize,
    #[arg(long, default_value_t = 20_000)]
    corpus_size: usize,
    #[arg(long, default_value_t = 18)]
    num_ne_types: usize,
    #[arg(long, default_value_t = 5_000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PipelineArgs {
    /// Directory written by `synth`
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    neg_per_query: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long)]
    all_caps: bool,
}

/// Failures caused by the inputs rather than the command line.
struct DataError(anyhow::Error);

fn main() -> ExitCode {
    let env = env_logger::Env::new().filter_or("DISCK_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
    run(std::env::args_os())
}

fn run<I: IntoIterator<Item = std::ffi::OsString>>(args: I) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    log::info!("config {}", serde_json::to_string(&cli.command).unwrap_or_default());
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(DataError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), DataError> {
    let result = match command {
        Command::BuildIndex(a) => build_index(&a),
        Command::Train(a) => train(&a),
        Command::Search(a) => search(&a),
        Command::Eval(a) => eval(&a),
        Command::Synth(a) => synth(&a),
        Command::Stats(a) => stats(&a),
        Command::Pipeline(a) => run_pipeline(&a),
    };
    result.map_err(DataError)
}

fn idf_path(index: &Path) -> PathBuf {
    let mut name = index.as_os_str().to_owned();
    name.push(".idf");
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_qrels(path: &Path) -> Result<Qrels> {
    Qrels::read(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &Path) -> Result<LinearModel<f64>> {
    LinearModel::read(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn passages(records: Vec<CorpusRecord>) -> Vec<CorpusRecord> {
    records.into_iter().filter(|r| r.kind != RecordKind::Question).collect()
}

fn qa_task(corpus_path: &Path, extract: &ExtractArgs) -> Result<QaTask> {
    let records = passages(corpus::load_corpus(corpus_path)?);
    Ok(QaTask::from_passages(&records, extract.policy()?, extract.all_caps)?)
}

fn load_mentions(path: &Path, policy: &TermPolicy) -> Result<Vec<Mention>> {
    let records = corpus::load_corpus(path)?;
    let mentions = corpus::mentions(&records, &records, policy)?;
    if mentions.is_empty() {
        bail!("{} holds no mention records", path.display());
    }
    Ok(mentions)
}

fn build_index(a: &BuildIndexArgs) -> Result<()> {
    let index = match a.task {
        TaskArg::Qa => {
            let task = qa_task(&a.corpus, &a.extract)?;
            let mut out = create(&idf_path(&a.out))?;
            task.featurizer.idf.write(&mut out)?;
            out.flush()?;
            pipeline::build_task_index(&task)?
        }
        TaskArg::Coref => pipeline::build_task_index(&CorefTask::new(&load_mentions(&a.corpus, &a.extract.policy()?)?))?,
    };
    save_index(&index, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let stats = index.stats();
    log::info!("indexed {} candidates, {} features", stats.doc_count, stats.feature_count);
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let config = PipelineConfig {
        task: a.task.into(),
        all_caps: a.extract.all_caps,
        max_iters: a.max_iters,
        tolerance: a.tolerance,
        grid: a.grid.clone(),
        k: a.k.unwrap_or(Task::from(a.task).default_k()),
        neg_per_query: a.neg_per_query,
        seed: a.seed,
        eval_ks: vec![],
    };
    let (qrels, dev_qrels) = (read_qrels(&a.qrels)?, read_qrels(&a.dev_qrels)?);
    let trained = match a.task {
        TaskArg::Qa => {
            let task = qa_task(&a.corpus, &a.extract)?;
            let index = pipeline::build_task_index(&task)?;
            let queries = task.questions(&corpus::load_corpus(&a.queries)?)?;
            let dev = task.questions(&corpus::load_corpus(&a.dev_queries)?)?;
            pipeline::train_and_tune(&task, &index, &queries, &qrels, &dev, &dev_qrels, &config)?
        }
        TaskArg::Coref => {
            let policy = a.extract.policy()?;
            let task = CorefTask::new(&load_mentions(&a.corpus, &policy)?);
            let index = pipeline::build_task_index(&task)?;
            let queries = CorefTask::queries(&load_mentions(&a.queries, &policy)?);
            let dev = CorefTask::queries(&load_mentions(&a.dev_queries, &policy)?);
            pipeline::train_and_tune(&task, &index, &queries, &qrels, &dev, &dev_qrels, &config)?
        }
    };
    for e in &trained.evaluations {
        eprintln!("lambda {:<8} nonzero {:<6} dev MAP {:.4}", e.lambda, e.nonzero, e.map);
    }
    eprintln!("selected lambda {}", trained.lambda);
    let mut out = create(&a.out)?;
    trained.model.write(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_run(run: &RunList, path: &Path, tag: &str) -> Result<()> {
    let mut out = create(path)?;
    run.write(&mut out, tag)?;
    out.flush()?;
    Ok(())
}

fn search_with<T: RetrievalTask>(
    task: &T,
    index: &InvertedIndex,
    model: &LinearModel<f64>,
    queries: &[(String, T::Query)],
    k: usize,
) -> Result<RunList> {
    let (run, summary) = pipeline::search_queries(task, index, model, queries, k)?;
    log::info!(
        "{} queries, mean {:.1} candidates scored of {}",
        summary.queries,
        summary.mean_docs_scored,
        index.doc_count()
    );
    Ok(run)
}

fn search(a: &SearchArgs) -> Result<()> {
    let index = load_index(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    let model = read_model(&a.model)?;
    let k = a.k.unwrap_or(Task::from(a.task).default_k());
    let policy = a.extract.policy()?;
    let run = match a.task {
        TaskArg::Qa => {
            let idf_file = idf_path(&a.index);
            let idf = IdfTable::read(open(&idf_file)?).with_context(|| format!("reading {}", idf_file.display()))?;
            // Candidate vectors live in the index; only the featurizer is needed here.
            let task = QaTask::new(QaFeaturizer::new(idf).with_terms(policy), &[])?;
            let queries = task.questions(&corpus::load_corpus(&a.queries)?)?;
            search_with(&task, &index, &model, &queries, k)?
        }
        TaskArg::Coref => {
            let task = CorefTask::new(&[]);
            let queries = CorefTask::queries(&load_mentions(&a.queries, &policy)?);
            search_with(&task, &index, &model, &queries, k)?
        }
    };
    write_run(&run, &a.out, &a.tag)
}

fn eval(a: &EvalArgs) -> Result<()> {
    if a.ks.contains(&0) {
        bail!("--ks values must be positive");
    }
    let run = RunList::read(open(&a.run)?).with_context(|| format!("reading {}", a.run.display()))?;
    let qrels = read_qrels(&a.qrels)?;
    let report = evaluate_all(&run, &qrels, &a.ks);
    if a.machine {
        print!("{}", report.machine_lines());
    } else {
        print!("{report}");
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let params = SynthParams {
        num_queries: a.num_queries,
        corpus_size: a.corpus_size,
        num_ne_types: a.num_ne_types,
        vocab_size: a.vocab_size,
        noise: a.noise,
        ..SynthParams::default()
    };
    let data = synth_generate(a.seed, &params)?;
    data.write_to(&a.out_dir).with_context(|| format!("writing {}", a.out_dir.display()))?;
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let index = load_index(&a.index).with_context(|| format!("reading {}", a.index.display()))?;
    println!("{}", serde_json::to_string_pretty(&index.stats())?);
    Ok(())
}

fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let config = PipelineConfig {
        grid: a.grid.clone(),
        neg_per_query: a.neg_per_query,
        seed: a.seed,
        k: a.k,
        all_caps: a.all_caps,
        ..PipelineConfig::default()
    };
    let experiment = pipeline::run_qa_experiment(&a.data_dir, &config)?;
    experiment
        .write_to(&a.out_dir)
        .with_context(|| format!("writing {}", a.out_dir.display()))?;
    print!("{}", experiment.summary_text());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> ExitCode {
        run(args.iter().map(|s| s.into()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(code(&["disck", "eval", "--run", "x"]), ExitCode::from(1));
        assert_eq!(code(&["disck", "frobnicate"]), ExitCode::from(1));
        assert_eq!(code(&["disck", "stats", "--index", "x", "--bogus"]), ExitCode::from(1));
    }

    #[test]
    fn missing_files_exit_two() {
        assert_eq!(code(&["disck", "stats", "--index", "/nonexistent/idx"]), ExitCode::from(2));
    }
}
