//! Integrated-gradients attribution for binary logistic models: how much
//! each input feature moved the score away from a baseline input.

use thiserror::Error;

use crate::models::{sigmoid, LogisticModel};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("attribution supports binary logistic models only, got {0} classes")]
    NotBinary(usize),
    #[error("input has {got} features, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("steps must be at least 1")]
    ZeroSteps,
}

/// Which score the attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributionTarget {
    /// The raw pre-sigmoid score. Linear in the input, so the attribution is
    /// exact at any step count.
    Logit,
    /// The class-1 probability. Nonlinear; the path integral is approximated
    /// by a midpoint Riemann sum over `steps` segments.
    Probability,
}

/// Attribution of `model`'s score at `x` relative to `baseline`: feature `j`
/// receives `(x_j - baseline_j)` times the average score gradient along the
/// straight path between the two points.
///
/// The attributions sum to `score(x) - score(baseline)` — exactly for the
/// logit target, and up to the Riemann error for the probability target.
pub fn integrated_gradients(
    model: &LogisticModel,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
    target: AttributionTarget,
) -> Result<Vec<f64>, AttributionError> {
    if model.n_classes() > 2 {
        return Err(AttributionError::NotBinary(model.n_classes()));
    }
    if x.len() != model.n_features || baseline.len() != model.n_features {
        return Err(AttributionError::DimMismatch {
            expected: model.n_features,
            got: if x.len() != model.n_features { x.len() } else { baseline.len() },
        });
    }
    if steps == 0 {
        return Err(AttributionError::ZeroSteps);
    }
    let weights = &model.units[0].weights;
    let delta: Vec<f64> = x.iter().zip(baseline).map(|(a, b)| a - b).collect();
    match target {
        AttributionTarget::Logit => {
            // d(logit)/dx_j = w_j everywhere, so the path average is w_j.
            Ok(delta.iter().zip(weights).map(|(d, w)| d * w).collect())
        }
        AttributionTarget::Probability => {
            let mut mean_slope = 0.0;
            for k in 0..steps {
                let alpha = (k as f64 + 0.5) / steps as f64;
                let point: Vec<f64> =
                    baseline.iter().zip(&delta).map(|(b, d)| b + alpha * d).collect();
                let p = sigmoid(model.logit(&point));
                mean_slope += p * (1.0 - p);
            }
            mean_slope /= steps as f64;
            Ok(delta.iter().zip(weights).map(|(d, w)| d * w * mean_slope).collect())
        }
    }
}

/// Index of the largest-magnitude attribution, ties to the lower index.
pub fn top_attribution(attributions: &[f64]) -> usize {
    let mut best = 0;
    for (i, a) in attributions.iter().enumerate().skip(1) {
        if a.abs() > attributions[best].abs() {
            best = i;
        }
    }
    best
}
