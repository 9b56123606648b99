//! The log-linear relevance model and its training.

mod sampling;
mod train;
mod tuning;

pub use sampling::{derive_seed, undersample_negatives, SampleError};
pub use train::{
    train, train_with_trace, Label, LogisticObjective, TrainConfig, TrainError, TrainTrace,
    TrainingInstance,
};
pub use tuning::{tune_lambda, LambdaEvaluation, TuneResult, DEFAULT_LAMBDA_GRID};

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::feature::{Feature, SparseVector};
use crate::scalar::{Scalar, Weight};

const MODEL_HEADER: &str = "#disck-model v1";

/// Training configuration captured alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub lambda: f64,
    pub seed: u64,
    /// Trainer iterations; not persisted in model files.
    pub iterations: Option<usize>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            seed: 0,
            iterations: None,
        }
    }
}

/// A weight vector θ over composed pairwise features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<S> {
    weights: SparseVector<S>,
    pub meta: ModelMeta,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file header {0:?} is not `{MODEL_HEADER} lambda=<λ> seed=<s>`")]
    Header(String),
    #[error("model file line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl<S: Weight> LinearModel<S> {
    pub fn new(weights: SparseVector<S>, meta: ModelMeta) -> Self {
        Self { weights, meta }
    }

    pub fn from_weights(weights: SparseVector<S>) -> Self {
        Self::new(weights, ModelMeta::default())
    }

    pub fn weights(&self) -> &SparseVector<S> {
        &self.weights
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// θ · f.
    pub fn score(&self, f: &SparseVector<S>) -> S {
        self.weights.dot(f)
    }
}

impl<S: Scalar> LinearModel<S> {
    /// Logistic probability of relevance.
    pub fn predict_prob(&self, f: &SparseVector<S>) -> S {
        sigmoid(self.score(f))
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "{MODEL_HEADER} lambda={} seed={}",
            self.meta.lambda, self.meta.seed
        )?;
        for (f, w) in self.weights.iter() {
            writeln!(out, "{f}\t{w}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ModelError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let meta = parse_header(&header).ok_or_else(|| ModelError::Header(header.clone()))?;
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let err = |reason: String| ModelError::Line {
                line: lineno,
                reason,
            };
            if line.is_empty() {
                continue;
            }
            let (feature, weight) = line
                .rsplit_once('\t')
                .ok_or_else(|| err("expected `feature<TAB>weight`".into()))?;
            let feature: Feature = feature.parse().map_err(|e| err(format!("{e}")))?;
            let weight: S = weight
                .parse()
                .map_err(|_| err(format!("bad weight {weight:?}")))?;
            if !weight.is_finite() || weight.is_zero() {
                return Err(err(format!("weight {weight} must be finite and nonzero")));
            }
            if !seen.insert(feature.clone()) {
                return Err(err(format!("duplicate feature {feature}")));
            }
            entries.push((feature, weight));
        }
        Ok(Self::new(SparseVector::from_entries(entries), meta))
    }
}

fn parse_header(line: &str) -> Option<ModelMeta> {
    let rest = line.strip_prefix(MODEL_HEADER)?;
    let mut lambda = None;
    let mut seed = None;
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=')?;
        match k {
            "lambda" => lambda = Some(v.parse::<f64>().ok()?),
            "seed" => seed = Some(v.parse::<u64>().ok()?),
            _ => {}
        }
    }
    Some(ModelMeta {
        lambda: lambda?,
        seed: seed?,
        iterations: None,
    })
}

pub(crate) fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}
