//! Logistic regression trained by full-batch gradient descent from a zero
//! initialization — no stochastic minibatching, so a given dataset and
//! parameter set always produce the same weights.
//!
//! Two classes use a single binary unit for class 1; more classes get one
//! one-vs-rest unit each.

use super::{argmax_tie_low, keyed_line, parse_field, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights; the bias is never penalized.
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { learning_rate: 0.1, epochs: 300, l2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub bias: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub n_features: usize,
    n_classes: usize,
    /// One unit for two classes, otherwise one per class.
    pub units: Vec<Unit>,
    /// Sample ids the fit saw, verbatim.
    pub fit_ids: Vec<u64>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable binary cross-entropy for a raw score `z` against a 0/1
/// target: `max(z, 0) - z*y + ln(1 + exp(-|z|))`. Saturation in the correct
/// direction costs zero rather than overflowing, so a non-finite loss really
/// means the weights blew up.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Mean penalized loss and its gradient for one binary unit.
fn loss_and_grad(
    x: &[Vec<f64>],
    y01: &[f64],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &y) in x.iter().zip(y01) {
        let z = bias + row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        loss += bce(z, y);
        let d = sigmoid(z) - y;
        for (g, &v) in grad_w.iter_mut().zip(row) {
            *g += d * v;
        }
        grad_b += d;
    }
    loss /= n;
    let mut penalty = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        penalty += w * w;
    }
    (loss + 0.5 * l2 * penalty, grad_w, grad_b / n)
}

fn train_unit(
    x: &[Vec<f64>],
    y01: &[f64],
    params: &LogisticParams,
    class: usize,
) -> Result<Unit, ModelError> {
    let mut weights = vec![0.0; x[0].len()];
    let mut bias = 0.0;
    for epoch in 1..=params.epochs {
        let (loss, grad_w, grad_b) = loss_and_grad(x, y01, &weights, bias, params.l2);
        if !loss.is_finite() {
            return Err(ModelError::Diverged { epoch, class });
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * g;
        }
        bias -= params.learning_rate * grad_b;
    }
    Ok(Unit { bias, weights })
}

impl LogisticModel {
    pub fn train(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        params: &LogisticParams,
        fit_ids: &[u64],
    ) -> Result<Self, ModelError> {
        let units = if n_classes <= 2 {
            let y01: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l == 1))).collect();
            vec![train_unit(x, &y01, params, 1)?]
        } else {
            (0..n_classes)
                .map(|class| {
                    let y01: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l == class))).collect();
                    train_unit(x, &y01, params, class)
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(LogisticModel { n_features: x[0].len(), n_classes, units, fit_ids: fit_ids.to_vec() })
    }

    /// Assemble a model from explicit units, e.g. for tests or callers that
    /// deserialize weights from elsewhere.
    pub fn from_units(
        n_features: usize,
        n_classes: usize,
        units: Vec<Unit>,
        fit_ids: Vec<u64>,
    ) -> Result<Self, ModelError> {
        let expected = if n_classes <= 2 { 1 } else { n_classes };
        if n_classes < 2 {
            return Err(ModelError::Format("a model needs at least two classes".into()));
        }
        if units.len() != expected {
            return Err(ModelError::Format(format!(
                "{n_classes} classes need {expected} units, got {}",
                units.len()
            )));
        }
        if let Some(bad) = units.iter().find(|u| u.weights.len() != n_features) {
            return Err(ModelError::Format(format!(
                "unit has {} weights, expected {n_features}",
                bad.weights.len()
            )));
        }
        Ok(LogisticModel { n_features, n_classes, units, fit_ids })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Raw pre-sigmoid score of the single binary unit.
    pub fn logit(&self, features: &[f64]) -> f64 {
        let unit = &self.units[0];
        unit.bias + features.iter().zip(&unit.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        argmax_tie_low(&self.predict_proba(features))
    }

    pub fn predict_proba(&self, features: &[f64]) -> Vec<f64> {
        if self.n_classes <= 2 {
            let p = sigmoid(self.logit(features));
            return vec![1.0 - p, p];
        }
        let scores: Vec<f64> = self
            .units
            .iter()
            .map(|u| sigmoid(u.bias + features.iter().zip(&u.weights).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        scores.iter().map(|s| s / total).collect()
    }

    /// Per-feature coefficient magnitude summed over units; the ranking
    /// recursive elimination prunes by.
    pub fn coef_magnitudes(&self) -> Vec<f64> {
        let mut mags = vec![0.0; self.n_features];
        for unit in &self.units {
            for (m, &w) in mags.iter_mut().zip(&unit.weights) {
                *m += w.abs();
            }
        }
        mags
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "MLPMODEL1 logistic\nclasses {}\nfeatures {}\nfit_ids",
            self.n_classes, self.n_features
        );
        for id in &self.fit_ids {
            out.push_str(&format!(" {id}"));
        }
        out.push('\n');
        for (i, unit) in self.units.iter().enumerate() {
            out.push_str(&format!("unit {i} {}", unit.bias));
            for w in &unit.weights {
                out.push_str(&format!(" {w}"));
            }
            out.push('\n');
        }
        out
    }

    pub(super) fn from_lines(mut lines: std::str::Lines<'_>) -> Result<Self, ModelError> {
        let n_classes: usize = parse_field(
            keyed_line(lines.next(), "classes")?
                .first()
                .ok_or_else(|| ModelError::Format("missing class count".into()))?,
            "class count",
        )?;
        let n_features: usize = parse_field(
            keyed_line(lines.next(), "features")?
                .first()
                .ok_or_else(|| ModelError::Format("missing feature count".into()))?,
            "feature count",
        )?;
        let fit_ids = keyed_line(lines.next(), "fit_ids")?
            .iter()
            .map(|t| parse_field(t, "fit id"))
            .collect::<Result<Vec<u64>, _>>()?;
        let expected_units = if n_classes <= 2 { 1 } else { n_classes };
        let mut units = Vec::with_capacity(expected_units);
        for i in 0..expected_units {
            let tokens = keyed_line(lines.next(), "unit")?;
            if tokens.len() != n_features + 2 {
                return Err(ModelError::Format(format!(
                    "unit {i} has {} values, expected {}",
                    tokens.len(),
                    n_features + 2
                )));
            }
            let index: usize = parse_field(tokens[0], "unit index")?;
            if index != i {
                return Err(ModelError::Format(format!("unit {index} out of order")));
            }
            let bias: f64 = parse_field(tokens[1], "bias")?;
            let weights = tokens[2..]
                .iter()
                .map(|t| parse_field(t, "weight"))
                .collect::<Result<Vec<f64>, _>>()?;
            units.push(Unit { bias, weights });
        }
        Ok(LogisticModel { n_features, n_classes, units, fit_ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<u64> {
        (0..n as u64).collect()
    }

    #[test]
    fn sigmoid_frozen_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_line_is_learned() {
        let x = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let y = vec![0, 0, 1, 1];
        let model = LogisticModel::train(&x, &y, 2, &LogisticParams::default(), &ids(x.len())).unwrap();
        assert!(model.units[0].weights[0] > 0.0);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(model.predict(row), label);
        }
    }

    #[test]
    fn zero_epochs_predicts_class_zero() {
        // Zero weights give probability exactly 0.5 and the tie goes to the
        // lower class.
        let params = LogisticParams { epochs: 0, ..LogisticParams::default() };
        let model = LogisticModel::train(&[vec![3.0]], &[1], 2, &params, &[0]).unwrap();
        assert_eq!(model.predict(&[100.0]), 0);
        assert_eq!(model.predict_proba(&[100.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let params = LogisticParams { learning_rate: 1e308, epochs: 50, l2: 0.0 };
        let x = vec![vec![1.0], vec![-1.0]];
        let err = LogisticModel::train(&x, &[0, 1], 2, &params, &[0, 1]).unwrap_err();
        assert!(matches!(err, ModelError::Diverged { .. }));
        assert!(err.to_string().contains("epoch"));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = vec![vec![0.5, -1.0], vec![1.5, 0.25], vec![-0.75, 2.0]];
        let y = vec![1.0, 0.0, 1.0];
        let weights = vec![0.3, -0.2];
        let bias = 0.1;
        let l2 = 0.05;
        let (_, grad_w, grad_b) = loss_and_grad(&x, &y, &weights, bias, l2);
        let h = 1e-6;
        for j in 0..2 {
            let mut up = weights.clone();
            let mut down = weights.clone();
            up[j] += h;
            down[j] -= h;
            let numeric =
                (loss_and_grad(&x, &y, &up, bias, l2).0 - loss_and_grad(&x, &y, &down, bias, l2).0) / (2.0 * h);
            assert!((grad_w[j] - numeric).abs() < 1e-6, "weight {j}: {} vs {numeric}", grad_w[j]);
        }
        let numeric_b =
            (loss_and_grad(&x, &y, &weights, bias + h, l2).0 - loss_and_grad(&x, &y, &weights, bias - h, l2).0)
                / (2.0 * h);
        assert!((grad_b - numeric_b).abs() < 1e-6);
    }

    #[test]
    fn three_class_one_vs_rest() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..5 {
            let jitter = i as f64 * 0.1;
            x.push(vec![jitter, jitter]);
            y.push(0);
            x.push(vec![4.0 + jitter, jitter]);
            y.push(1);
            x.push(vec![jitter, 4.0 + jitter]);
            y.push(2);
        }
        let model = LogisticModel::train(&x, &y, 3, &LogisticParams::default(), &ids(x.len())).unwrap();
        assert_eq!(model.units.len(), 3);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(model.predict(row), label);
        }
        let proba = model.predict_proba(&x[0]);
        assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_shrinks_the_weights() {
        let x = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let y = vec![0, 0, 1, 1];
        let plain = LogisticModel::train(&x, &y, 2, &LogisticParams::default(), &ids(4)).unwrap();
        let ridged = LogisticModel::train(
            &x,
            &y,
            2,
            &LogisticParams { l2: 1.0, ..LogisticParams::default() },
            &ids(4),
        )
        .unwrap();
        assert!(ridged.units[0].weights[0].abs() < plain.units[0].weights[0].abs());
    }

    #[test]
    fn hand_built_unit_probability() {
        // w = (1, 0), b = 0 at x = (2, 3) scores sigmoid(2).
        let model = LogisticModel {
            n_features: 2,
            n_classes: 2,
            units: vec![Unit { bias: 0.0, weights: vec![1.0, 0.0] }],
            fit_ids: vec![],
        };
        let proba = model.predict_proba(&[2.0, 3.0]);
        assert!((proba[1] - 0.8807970779778823).abs() < 1e-15);
        assert!((proba[0] - (1.0 - 0.8807970779778823)).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> =
            (0..12).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y01: Vec<f64> = (0..12).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let h = 1e-5;
        for _ in 0..20 {
            let weights: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let bias: f64 = rng.gen_range(-1.0..1.0);
            let l2 = 0.02;
            let (_, grad_w, grad_b) = loss_and_grad(&x, &y01, &weights, bias, l2);
            for j in 0..3 {
                let mut up = weights.clone();
                let mut down = weights.clone();
                up[j] += h;
                down[j] -= h;
                let numeric = (loss_and_grad(&x, &y01, &up, bias, l2).0
                    - loss_and_grad(&x, &y01, &down, bias, l2).0)
                    / (2.0 * h);
                let rel = (grad_w[j] - numeric).abs() / (numeric.abs() + 1e-8);
                assert!(rel < 1e-4, "weight {j}: {} vs {numeric}", grad_w[j]);
            }
            let numeric_b = (loss_and_grad(&x, &y01, &weights, bias + h, l2).0
                - loss_and_grad(&x, &y01, &weights, bias - h, l2).0)
                / (2.0 * h);
            let rel_b = (grad_b - numeric_b).abs() / (numeric_b.abs() + 1e-8);
            assert!(rel_b < 1e-4);
        }
    }

    #[test]
    fn bias_gradient_vanishes_at_zero_on_balanced_data() {
        // With zero weights every score is 0.5, so the bias gradient is the
        // mean of (0.5 - y), exactly zero when the classes balance.
        let x = vec![vec![1.0, -3.0], vec![-2.0, 0.5], vec![4.0, 4.0], vec![0.0, -1.0]];
        let y01 = vec![0.0, 1.0, 0.0, 1.0];
        let (_, _, grad_b) = loss_and_grad(&x, &y01, &[0.0, 0.0], 0.0, 0.0);
        assert_eq!(grad_b, 0.0);
    }

    #[test]
    fn fit_ids_round_trip_through_text() {
        let x = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let y = vec![0, 0, 1, 1];
        let model =
            LogisticModel::train(&x, &y, 2, &LogisticParams::default(), &[40, 2, 17, 9]).unwrap();
        assert_eq!(model.fit_ids, vec![40, 2, 17, 9]);
        let back = match crate::models::Model::from_text(&model.to_text()).unwrap() {
            crate::models::Model::Logistic(m) => m,
            other => panic!("wrong kind {other:?}"),
        };
        assert_eq!(back, model);
    }
}
