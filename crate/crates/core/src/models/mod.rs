//! A deliberately small model zoo: a majority-class baseline, logistic
//! regression trained by full-batch gradient descent, and a random forest.
//!
//! Everything here is seeded and deterministic, and every model serializes to
//! a line-based text form (`MLPMODEL1 ...`) that round-trips exactly, so runs
//! can be archived and replayed.

pub mod forest;
pub mod logistic;
pub mod majority;

pub use forest::{FeatureSubsample, ForestModel, ForestParams};
pub use logistic::{sigmoid, LogisticModel, LogisticParams, Unit};
pub use majority::MajorityModel;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("sample has {got} features, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training diverged: non-finite loss at epoch {epoch} for class {class}")]
    Diverged { epoch: usize, class: usize },
    #[error("bad model text: {0}")]
    Format(String),
}

/// Which model to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Majority,
    Logistic(LogisticParams),
    Forest(ForestParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Majority => "majority",
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::Forest(_) => "forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Majority(MajorityModel),
    Logistic(LogisticModel),
    Forest(ForestModel),
}

/// Train the model described by `spec` on dense feature rows and labels.
/// `fit_ids` are the sample ids behind the rows, recorded verbatim on the
/// model so an audit can ask what the fit actually saw. Only the forest
/// consumes the seed; the other two are deterministic by construction.
pub fn train_model(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    seed: u64,
    fit_ids: &[u64],
) -> Result<Model, ModelError> {
    if x.is_empty() || y.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(ModelError::Format(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    if fit_ids.len() != x.len() {
        return Err(ModelError::Format(format!("{} fit ids for {} rows", fit_ids.len(), x.len())));
    }
    let n_features = x[0].len();
    for row in x {
        if row.len() != n_features {
            return Err(ModelError::DimMismatch { expected: n_features, got: row.len() });
        }
    }
    Ok(match spec {
        ModelSpec::Majority => Model::Majority(MajorityModel::train(x, y, n_classes, fit_ids)?),
        ModelSpec::Logistic(params) => {
            Model::Logistic(LogisticModel::train(x, y, n_classes, params, fit_ids)?)
        }
        ModelSpec::Forest(params) => {
            Model::Forest(ForestModel::train(x, y, n_classes, params, seed, fit_ids)?)
        }
    })
}

impl Model {
    pub fn n_classes(&self) -> usize {
        match self {
            Model::Majority(m) => m.n_classes(),
            Model::Logistic(m) => m.n_classes(),
            Model::Forest(m) => m.n_classes(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Majority(m) => m.n_features,
            Model::Logistic(m) => m.n_features,
            Model::Forest(m) => m.n_features,
        }
    }

    /// The sample ids the model was fitted on, verbatim.
    pub fn fit_ids(&self) -> &[u64] {
        match self {
            Model::Majority(m) => &m.fit_ids,
            Model::Logistic(m) => &m.fit_ids,
            Model::Forest(m) => &m.fit_ids,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize, ModelError> {
        check_dim(self.n_features(), features)?;
        Ok(match self {
            Model::Majority(m) => m.predict(),
            Model::Logistic(m) => m.predict(features),
            Model::Forest(m) => m.predict(features),
        })
    }

    /// Per-class scores summing to 1.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.n_features(), features)?;
        Ok(match self {
            Model::Majority(m) => m.predict_proba(),
            Model::Logistic(m) => m.predict_proba(features),
            Model::Forest(m) => m.predict_proba(features),
        })
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        rows.iter().map(|row| self.predict(row)).collect()
    }

    pub fn to_text(&self) -> String {
        match self {
            Model::Majority(m) => m.to_text(),
            Model::Logistic(m) => m.to_text(),
            Model::Forest(m) => m.to_text(),
        }
    }

    pub fn from_text(text: &str) -> Result<Model, ModelError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ModelError::Format("empty model text".into()))?;
        let kind = header
            .strip_prefix("MLPMODEL1 ")
            .ok_or_else(|| ModelError::Format(format!("bad header '{header}'")))?;
        match kind {
            "majority" => Ok(Model::Majority(MajorityModel::from_lines(lines)?)),
            "logistic" => Ok(Model::Logistic(LogisticModel::from_lines(lines)?)),
            "forest" => Ok(Model::Forest(ForestModel::from_lines(lines)?)),
            other => Err(ModelError::Format(format!("unknown model kind '{other}'"))),
        }
    }
}

fn check_dim(expected: usize, features: &[f64]) -> Result<(), ModelError> {
    if features.len() != expected {
        return Err(ModelError::DimMismatch { expected, got: features.len() });
    }
    Ok(())
}

/// Highest-scoring class index, ties resolved to the lower index.
pub(crate) fn argmax_tie_low(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn parse_field<T: std::str::FromStr>(token: &str, what: &str) -> Result<T, ModelError> {
    token.parse().map_err(|_| ModelError::Format(format!("bad {what} '{token}'")))
}

/// Expect `line` to be `key v0 v1 ...` and return the value tokens.
pub(crate) fn keyed_line<'a>(line: Option<&'a str>, key: &str) -> Result<Vec<&'a str>, ModelError> {
    let line = line.ok_or_else(|| ModelError::Format(format!("missing '{key}' line")))?;
    let mut tokens = line.split_whitespace();
    match tokens.next() {
        Some(k) if k == key => Ok(tokens.collect()),
        _ => Err(ModelError::Format(format!("expected '{key}' line, found '{line}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 8)).collect();
        (x, y)
    }

    fn ids(n: usize) -> Vec<u64> {
        (0..n as u64).collect()
    }

    #[test]
    fn every_kind_round_trips_through_text() {
        let (x, y) = xy();
        let specs = [
            ModelSpec::Majority,
            ModelSpec::Logistic(LogisticParams::default()),
            ModelSpec::Forest(ForestParams { n_trees: 5, ..ForestParams::default() }),
        ];
        for spec in &specs {
            let model = train_model(spec, &x, &y, 2, 3, &ids(20)).unwrap();
            let text = model.to_text();
            let back = Model::from_text(&text).unwrap();
            assert_eq!(back.to_text(), text, "{} text changed on reload", spec.name());
            assert_eq!(back.fit_ids(), model.fit_ids());
            for row in &x {
                assert_eq!(back.predict(row).unwrap(), model.predict(row).unwrap());
            }
        }
    }

    #[test]
    fn from_text_rejects_garbage() {
        assert!(Model::from_text("").is_err());
        assert!(Model::from_text("MLPMODEL2 majority\n").is_err());
        assert!(Model::from_text("MLPMODEL1 perceptron\n").is_err());
        assert!(Model::from_text("MLPMODEL1 majority\nclasses x\n").is_err());
    }

    #[test]
    fn predict_checks_dimensions() {
        let (x, y) = xy();
        let model = train_model(&ModelSpec::Majority, &x, &y, 2, 0, &ids(20)).unwrap();
        let err = model.predict(&[1.0]).unwrap_err();
        assert!(matches!(err, ModelError::DimMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn train_rejects_empty_and_ragged_input() {
        assert!(matches!(
            train_model(&ModelSpec::Majority, &[], &[], 2, 0, &[]),
            Err(ModelError::EmptyTrainingSet)
        ));
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(train_model(&ModelSpec::Majority, &ragged, &[0, 1], 2, 0, &[0, 1]).is_err());
        let ok = vec![vec![1.0], vec![2.0]];
        assert!(train_model(&ModelSpec::Majority, &ok, &[0, 1], 2, 0, &[0]).is_err());
    }

    #[test]
    fn proba_sums_to_one_for_every_kind() {
        let (x, y) = xy();
        let specs = [
            ModelSpec::Majority,
            ModelSpec::Logistic(LogisticParams::default()),
            ModelSpec::Forest(ForestParams { n_trees: 9, ..ForestParams::default() }),
        ];
        for spec in &specs {
            let model = train_model(spec, &x, &y, 2, 1, &ids(20)).unwrap();
            let proba = model.predict_proba(&x[3]).unwrap();
            assert_eq!(proba.len(), 2);
            assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
