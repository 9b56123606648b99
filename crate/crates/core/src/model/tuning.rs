//! Regularization strength selection by dev-set MAP.

use rayon::prelude::*;

use super::{train, LinearModel, TrainConfig, TrainError, TrainingInstance};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEvaluation {
    pub lambda: f64,
    pub map: f64,
    pub nonzero: usize,
}

#[derive(Debug, Clone)]
pub struct TuneResult<S> {
    pub lambda: f64,
    pub model: LinearModel<S>,
    /// One entry per grid point, in grid order.
    pub evaluations: Vec<LambdaEvaluation>,
}

/// Trains one model per grid point and keeps the one whose `evaluate` score
/// (dev MAP) is highest. Ties go to the larger λ, the sparser model.
///
/// Grid points are trained concurrently; the result does not depend on
/// scheduling.
pub fn tune_lambda<S, E>(
    grid: &[f64],
    instances: &[TrainingInstance<S>],
    config: &TrainConfig,
    evaluate: E,
) -> Result<TuneResult<S>, TrainError>
where
    S: Scalar,
    E: Fn(&LinearModel<S>) -> f64 + Sync,
{
    if grid.is_empty() {
        return Err(TrainError::EmptyGrid);
    }
    let trained: Vec<(f64, LinearModel<S>, f64)> = grid
        .par_iter()
        .map(|&lambda| {
            let model = train(instances, lambda, config)?;
            let map = evaluate(&model);
            log::info!(
                "lambda={lambda} nonzero={} dev_map={map:.6}",
                model.nonzero_count()
            );
            Ok((lambda, model, map))
        })
        .collect::<Result<_, TrainError>>()?;

    let evaluations = trained
        .iter()
        .map(|(lambda, model, map)| LambdaEvaluation {
            lambda: *lambda,
            map: *map,
            nonzero: model.nonzero_count(),
        })
        .collect();
    let (lambda, model, _) = trained
        .into_iter()
        .reduce(|best, next| {
            let better = next.2 > best.2 || (next.2 == best.2 && next.0 > best.0);
            if better {
                next
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    Ok(TuneResult {
        lambda,
        model,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::Feature;
    use crate::model::Label;

    fn data() -> Vec<TrainingInstance<f64>> {
        let f = |name: &str| -> crate::feature::SparseVector<f64> {
            [(Feature::new("f", name).unwrap(), 1.0)].into_iter().collect()
        };
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(TrainingInstance {
                features: f("A"),
                label: if i < 5 { Label::Relevant } else { Label::Irrelevant },
                query_id: "q".into(),
            });
            v.push(TrainingInstance {
                features: f("B"),
                label: if i < 5 { Label::Irrelevant } else { Label::Relevant },
                query_id: "q".into(),
            });
        }
        v
    }

    #[test]
    fn single_point_grid() {
        let r = tune_lambda(&[0.3], &data(), &TrainConfig::default(), |_| 0.1).unwrap();
        assert_eq!(r.lambda, 0.3);
    }

    #[test]
    fn ties_go_to_larger_lambda() {
        let r = tune_lambda(&[0.01, 0.1], &data(), &TrainConfig::default(), |_| 0.5).unwrap();
        assert_eq!(r.lambda, 0.1);
    }

    #[test]
    fn picks_recorded_maximum() {
        // Prefer denser models: the score grows with the nonzero count.
        let r = tune_lambda(&DEFAULT_LAMBDA_GRID, &data(), &TrainConfig::default(), |m| {
            m.weights().iter().map(|(_, w)| w.abs()).sum()
        })
        .unwrap();
        let best = r.evaluations.iter().map(|e| e.map).fold(f64::MIN, f64::max);
        let chosen = r.evaluations.iter().find(|e| e.lambda == r.lambda).unwrap();
        assert_eq!(chosen.map, best);
        assert_eq!(r.evaluations.len(), 6);
    }

    #[test]
    fn empty_grid() {
        assert!(matches!(
            tune_lambda(&[], &data(), &TrainConfig::default(), |_| 0.0),
            Err(TrainError::EmptyGrid)
        ));
    }
}
