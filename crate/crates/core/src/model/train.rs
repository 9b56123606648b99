//! L1-regularized logistic regression by proximal gradient descent (ISTA)
//! with backtracking line search.
//!
//! Minimizes `(1/n) Σ log(1 + exp(-y_i θ·f_i)) + λ‖θ‖₁` with `y ∈ {-1, +1}`.
//! There is no intercept: a constant offset cannot change a ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use super::{LinearModel, ModelMeta};
use crate::feature::{Feature, SparseVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Irrelevant,
    Relevant,
}

impl Label {
    fn sign<S: Scalar>(self) -> S {
        match self {
            Label::Relevant => S::one(),
            Label::Irrelevant => -S::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance<S> {
    pub features: SparseVector<S>,
    pub label: Label,
    pub query_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    /// Recorded in the model; the batch trainer itself draws no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training data needs both relevant and irrelevant instances")]
    SingleLabel,
    #[error("instance for query {query_id} has a non-finite feature weight")]
    NonFinite { query_id: String },
    #[error("regularization strength {0} must be finite and non-negative")]
    InvalidLambda(f64),
    #[error("the regularization grid is empty")]
    EmptyGrid,
}

/// Objective values after every accepted step, starting at θ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The training objective over a fixed, canonically ordered design matrix.
#[derive(Debug, Clone)]
pub struct LogisticObjective<S> {
    features: Vec<Feature>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<S>,
    labels: Vec<S>,
    lambda: S,
}

impl<S: Scalar> LogisticObjective<S> {
    /// Builds the design matrix. Instances are sorted into a canonical order
    /// first so that the floating-point sums do not depend on input order.
    pub fn new(instances: &[TrainingInstance<S>], lambda: f64) -> Result<Self, TrainError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(TrainError::InvalidLambda(lambda));
        }
        if let Some(bad) = instances.iter().find(|i| !i.features.all_finite()) {
            return Err(TrainError::NonFinite {
                query_id: bad.query_id.clone(),
            });
        }
        let has = |l: Label| instances.iter().any(|i| i.label == l);
        if !has(Label::Relevant) || !has(Label::Irrelevant) {
            return Err(TrainError::SingleLabel);
        }

        let mut ordered: Vec<&TrainingInstance<S>> = instances.iter().collect();
        ordered.sort_by(|a, b| {
            a.label.cmp(&b.label).then_with(|| {
                a.features
                    .iter()
                    .partial_cmp(b.features.iter())
                    .unwrap_or(Ordering::Equal)
            })
        });

        let mut columns: BTreeMap<&Feature, u32> = BTreeMap::new();
        for inst in &ordered {
            for f in inst.features.features() {
                columns.entry(f).or_insert(0);
            }
        }
        for (i, v) in columns.values_mut().enumerate() {
            *v = i as u32;
        }

        let mut row_start = Vec::with_capacity(ordered.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut labels = Vec::with_capacity(ordered.len());
        row_start.push(0);
        for inst in &ordered {
            for (f, w) in inst.features.iter() {
                cols.push(columns[f]);
                vals.push(*w);
            }
            row_start.push(cols.len());
            labels.push(inst.label.sign());
        }
        Ok(Self {
            features: columns.into_keys().cloned().collect(),
            row_start,
            cols,
            vals,
            labels,
            lambda: S::of(lambda),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    fn margins(&self, theta: &[S]) -> Vec<S> {
        (0..self.len())
            .map(|r| {
                let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
                self.cols[lo..hi]
                    .iter()
                    .zip(&self.vals[lo..hi])
                    .map(|(&c, &v)| theta[c as usize] * v)
                    .sum::<S>()
            })
            .collect()
    }

    /// Mean logistic loss (the smooth part).
    pub fn loss(&self, theta: &[S]) -> S {
        let n = S::of(self.len() as f64);
        self.margins(theta)
            .iter()
            .zip(&self.labels)
            .map(|(&m, &y)| softplus(-y * m))
            .sum::<S>()
            / n
    }

    /// Gradient of [`Self::loss`].
    pub fn gradient(&self, theta: &[S]) -> Vec<S> {
        let n = S::of(self.len() as f64);
        let mut grad = vec![S::zero(); self.dim()];
        for (r, (&m, &y)) in self.margins(theta).iter().zip(&self.labels).enumerate() {
            let coef = -y * super::sigmoid(-y * m) / n;
            let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
            for (&c, &v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                grad[c as usize] += coef * v;
            }
        }
        grad
    }

    pub fn penalty(&self, theta: &[S]) -> S {
        self.lambda * theta.iter().map(|t| t.abs()).sum::<S>()
    }

    /// Full regularized objective.
    pub fn value(&self, theta: &[S]) -> S {
        self.loss(theta) + self.penalty(theta)
    }
}

fn softplus<S: Scalar>(z: S) -> S {
    if z > S::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn soft_threshold<S: Scalar>(x: S, t: S) -> S {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        S::zero()
    }
}

/// Trains a model; see [`train_with_trace`].
pub fn train<S: Scalar>(
    instances: &[TrainingInstance<S>],
    lambda: f64,
    config: &TrainConfig,
) -> Result<LinearModel<S>, TrainError> {
    train_with_trace(instances, lambda, config).map(|(m, _)| m)
}

/// Trains a model and returns the objective after every iteration.
pub fn train_with_trace<S: Scalar>(
    instances: &[TrainingInstance<S>],
    lambda: f64,
    config: &TrainConfig,
) -> Result<(LinearModel<S>, TrainTrace), TrainError> {
    let objective = LogisticObjective::new(instances, lambda)?;
    let lam = objective.lambda;
    let mut theta = vec![S::zero(); objective.dim()];
    let mut current = objective.value(&theta);
    let mut trace = TrainTrace {
        objective: vec![current.as_f64()],
        iterations: 0,
        converged: false,
    };
    let mut step = S::one();
    let min_step = S::of(1e-30);
    let max_step = S::of(1e12);

    for iter in 1..=config.max_iters {
        trace.iterations = iter;
        let grad = objective.gradient(&theta);
        let loss = objective.loss(&theta);
        step = (step + step).min(max_step);
        let (next, next_loss) = loop {
            let candidate: Vec<S> = theta
                .iter()
                .zip(&grad)
                .map(|(&t, &g)| soft_threshold(t - step * g, step * lam))
                .collect();
            let candidate_loss = objective.loss(&candidate);
            let (mut lin, mut quad) = (S::zero(), S::zero());
            for ((&c, &t), &g) in candidate.iter().zip(&theta).zip(&grad) {
                let d = c - t;
                lin += g * d;
                quad += d * d;
            }
            if candidate_loss <= loss + lin + quad / (step + step) {
                break (candidate, candidate_loss);
            }
            step = step * S::of(0.5);
            if step < min_step {
                break (theta.clone(), loss);
            }
        };
        let next_value = next_loss + objective.penalty(&next);
        theta = next;
        let decrease = current - next_value;
        trace.objective.push(next_value.as_f64());
        let scale = current.abs().max(S::min_positive_value());
        current = next_value;
        if decrease <= S::of(config.tolerance) * scale {
            trace.converged = true;
            break;
        }
    }

    let weights = objective
        .features
        .iter()
        .zip(&theta)
        .map(|(f, &w)| (f.clone(), w))
        .collect();
    let meta = ModelMeta {
        lambda,
        seed: config.seed,
        iterations: Some(trace.iterations),
    };
    Ok((LinearModel::new(weights, meta), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(features: &[(&str, f64)], label: Label) -> TrainingInstance<f64> {
        TrainingInstance {
            features: features
                .iter()
                .map(|(f, w)| (Feature::new("f", f).unwrap(), *w))
                .collect(),
            label,
            query_id: "q".into(),
        }
    }

    fn separable() -> Vec<TrainingInstance<f64>> {
        let mut v = Vec::new();
        for _ in 0..5 {
            v.push(inst(&[("A", 1.0)], Label::Relevant));
            v.push(inst(&[("B", 1.0)], Label::Irrelevant));
        }
        v
    }

    #[test]
    fn separable_signs() {
        let m = train(&separable(), 1e-4, &TrainConfig::default()).unwrap();
        let a = *m.weights().get(&Feature::new("f", "A").unwrap()).unwrap();
        let b = *m.weights().get(&Feature::new("f", "B").unwrap()).unwrap();
        assert!(a > 0.0 && b < 0.0, "θ_A={a} θ_B={b}");
    }

    #[test]
    fn huge_lambda_gives_empty_model() {
        let m = train(&separable(), 1e6, &TrainConfig::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn symmetric_data_gives_empty_model() {
        let mut v = Vec::new();
        for _ in 0..4 {
            v.push(inst(&[("A", 1.0), ("B", 0.5)], Label::Relevant));
            v.push(inst(&[("A", 1.0), ("B", 0.5)], Label::Irrelevant));
        }
        for lambda in [0.0, 0.01] {
            assert!(train(&v, lambda, &TrainConfig::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn errors() {
        let one_label = vec![inst(&[("A", 1.0)], Label::Relevant)];
        assert_eq!(
            train(&one_label, 0.1, &TrainConfig::default()).unwrap_err(),
            TrainError::SingleLabel
        );
        let mut bad = separable();
        bad.push(inst(&[("C", f64::NAN)], Label::Relevant));
        assert!(matches!(
            train(&bad, 0.1, &TrainConfig::default()),
            Err(TrainError::NonFinite { .. })
        ));
        assert!(matches!(
            train(&separable(), -1.0, &TrainConfig::default()),
            Err(TrainError::InvalidLambda(_))
        ));
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> Vec<TrainingInstance<f64>> {
        (0..n)
            .map(|i| {
                let feats: Vec<(String, f64)> = (0..rng.gen_range(1..5))
                    .map(|_| (format!("x{}", rng.gen_range(0..8)), rng.gen_range(-1.0..1.0)))
                    .collect();
                let label = if i % 2 == 0 { Label::Relevant } else { Label::Irrelevant };
                TrainingInstance {
                    features: feats
                        .iter()
                        .map(|(f, w)| (Feature::new("f", f).unwrap(), *w))
                        .collect(),
                    label,
                    query_id: format!("q{i}"),
                }
            })
            .collect()
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let data = random_problem(&mut rng, 40);
            let (_, trace) = train_with_trace(&data, 0.01, &TrainConfig::default()).unwrap();
            for w in trace.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_problem(&mut rng, 30);
        let mut reversed = data.clone();
        reversed.reverse();
        let cfg = TrainConfig::default();
        assert_eq!(train(&data, 0.02, &cfg).unwrap(), train(&reversed, 0.02, &cfg).unwrap());
    }

    #[test]
    fn f32_training_agrees_in_sign() {
        let data32: Vec<TrainingInstance<f32>> = separable()
            .into_iter()
            .map(|i| TrainingInstance {
                features: i.features.iter().map(|(f, w)| (f.clone(), *w as f32)).collect(),
                label: i.label,
                query_id: i.query_id,
            })
            .collect();
        let m = train(&data32, 1e-3, &TrainConfig::default()).unwrap();
        assert!(*m.weights().get(&Feature::new("f", "A").unwrap()).unwrap() > 0.0);
    }
}
