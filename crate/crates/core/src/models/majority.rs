//! Majority-class baseline: predicts the most frequent training class no
//! matter the input. Any model worth keeping has to beat this.

use super::{argmax_tie_low, keyed_line, parse_field, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct MajorityModel {
    pub n_features: usize,
    /// Training-set count per class.
    pub counts: Vec<usize>,
    /// Sample ids the fit saw, verbatim; what the auditor compares against
    /// the split.
    pub fit_ids: Vec<u64>,
}

impl MajorityModel {
    pub fn train(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        fit_ids: &[u64],
    ) -> Result<Self, ModelError> {
        let mut counts = vec![0usize; n_classes];
        for &label in y {
            if label >= n_classes {
                return Err(ModelError::Format(format!("label {label} out of range for {n_classes} classes")));
            }
            counts[label] += 1;
        }
        Ok(MajorityModel { n_features: x[0].len(), counts, fit_ids: fit_ids.to_vec() })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// The majority class; ties go to the lower class index.
    pub fn predict(&self) -> usize {
        let scores: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        argmax_tie_low(&scores)
    }

    pub fn predict_proba(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn to_text(&self) -> String {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        let ids: Vec<String> = self.fit_ids.iter().map(|c| c.to_string()).collect();
        let mut out = format!(
            "MLPMODEL1 majority\nclasses {}\nfeatures {}\nfit_ids",
            self.counts.len(),
            self.n_features,
        );
        if !ids.is_empty() {
            out.push(' ');
            out.push_str(&ids.join(" "));
        }
        out.push_str(&format!("\ncounts {}\n", counts.join(" ")));
        out
    }

    pub(super) fn from_lines(mut lines: std::str::Lines<'_>) -> Result<Self, ModelError> {
        let classes: usize = parse_field(
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
        let count_tokens = keyed_line(lines.next(), "counts")?;
        if count_tokens.len() != classes {
            return Err(ModelError::Format(format!(
                "expected {classes} counts, found {}",
                count_tokens.len()
            )));
        }
        let counts = count_tokens
            .iter()
            .map(|t| parse_field(t, "count"))
            .collect::<Result<Vec<usize>, _>>()?;
        Ok(MajorityModel { n_features, counts, fit_ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicts_most_frequent_class() {
        let x = vec![vec![0.0]; 5];
        let model = MajorityModel::train(&x, &[0, 1, 1, 1, 0], 2, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(model.predict(), 1);
        assert_eq!(model.predict_proba(), vec![0.4, 0.6]);
        assert_eq!(model.fit_ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn tie_goes_to_lower_class() {
        let x = vec![vec![0.0]; 4];
        let model = MajorityModel::train(&x, &[2, 2, 1, 1], 3, &[7, 8, 9, 10]).unwrap();
        assert_eq!(model.predict(), 1);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let x = vec![vec![0.0]; 2];
        assert!(MajorityModel::train(&x, &[0, 5], 2, &[0, 1]).is_err());
    }
}
