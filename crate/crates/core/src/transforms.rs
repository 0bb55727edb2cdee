//! Fitted feature selectors and resampling transforms. Every fit function
//! records which sample ids it saw, so the auditor can later check the fit
//! set never strayed outside the training part.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dataset::{derive_sample, DataError, Sample};
use crate::models::{LogisticModel, LogisticParams};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot keep {k} of {p} features")]
    KTooLarge { k: usize, p: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorMethod {
    /// Drop features that are constant on the fit set.
    Variance,
    /// Keep the top-k features by one-way ANOVA F score.
    UnivariateF,
    /// Recursively drop the weakest tenth of features by coefficient
    /// magnitude until k remain.
    Recursive,
}

impl SelectorMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SelectorMethod::Variance => "variance",
            SelectorMethod::UnivariateF => "univariate_f",
            SelectorMethod::Recursive => "recursive",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "variance" => Some(SelectorMethod::Variance),
            "univariate_f" => Some(SelectorMethod::UnivariateF),
            "recursive" => Some(SelectorMethod::Recursive),
            _ => None,
        }
    }
}

/// A fitted feature selector: which features survive, what they scored, and
/// which samples the fit was allowed to look at.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    pub method: SelectorMethod,
    pub n_features_in: usize,
    /// The k the caller asked for; None for the variance filter, which keeps
    /// whatever is not constant.
    pub requested_k: Option<usize>,
    /// Surviving feature indices, strictly increasing.
    pub kept: Vec<usize>,
    /// Per input feature: variance, F score, or final coefficient magnitude
    /// (zero once eliminated), depending on the method.
    pub scores: Vec<f64>,
    /// Sample ids the fit saw, verbatim.
    pub fit_ids: Vec<u64>,
    /// Set when the fit had to fall back (recursive elimination whose model
    /// would not train).
    pub flagged: bool,
    /// Elimination rounds actually run; zero for the other methods.
    pub rounds: usize,
}

impl Selector {
    /// Project one feature row down to the kept features.
    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>, TransformError> {
        if row.len() != self.n_features_in {
            return Err(TransformError::Invalid(format!(
                "row has {} features, selector was fitted on {}",
                row.len(),
                self.n_features_in
            )));
        }
        Ok(self.kept.iter().map(|&i| row[i]).collect())
    }

    pub fn project_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, TransformError> {
        rows.iter().map(|row| self.project(row)).collect()
    }

    pub fn project_names(&self, names: &[String]) -> Vec<String> {
        self.kept.iter().map(|&i| names[i].clone()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("MLPSEL1 {}\nfeatures {}\n", self.method.name(), self.n_features_in);
        if let Some(k) = self.requested_k {
            let _ = writeln!(out, "k {k}");
        }
        let _ = writeln!(out, "flagged {}", u8::from(self.flagged));
        let _ = writeln!(out, "rounds {}", self.rounds);
        out.push_str("kept:");
        for v in &self.kept {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
        out.push_str("scores:");
        for s in &self.scores {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        out.push_str("fit_ids:");
        for id in &self.fit_ids {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Selector, TransformError> {
        let bad = |m: String| TransformError::Invalid(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty selector text".into()))?;
        let method = header
            .strip_prefix("MLPSEL1 ")
            .and_then(SelectorMethod::from_name)
            .ok_or_else(|| bad(format!("bad selector header '{header}'")))?;
        let mut n_features_in = None;
        let mut requested_k = None;
        let mut flagged = false;
        let mut rounds = 0;
        let mut kept = Vec::new();
        let mut scores = Vec::new();
        let mut fit_ids = Vec::new();
        for line in lines {
            let mut tokens = line.split_whitespace();
            let key = match tokens.next() {
                Some(k) => k,
                None => continue,
            };
            let rest: Vec<&str> = tokens.collect();
            let one = || rest.first().copied().ok_or_else(|| bad(format!("missing value on '{line}'")));
            match key {
                "features" => {
                    n_features_in =
                        Some(one()?.parse().map_err(|_| bad(format!("bad feature count on '{line}'")))?)
                }
                "k" => requested_k = Some(one()?.parse().map_err(|_| bad(format!("bad k on '{line}'")))?),
                "flagged" => flagged = one()? == "1",
                "rounds" => rounds = one()?.parse().map_err(|_| bad(format!("bad rounds on '{line}'")))?,
                "kept:" => {
                    kept = rest
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(format!("bad kept index '{t}'"))))
                        .collect::<Result<_, _>>()?
                }
                "scores:" => {
                    scores = rest
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(format!("bad score '{t}'"))))
                        .collect::<Result<_, _>>()?
                }
                "fit_ids:" => {
                    fit_ids = rest
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(format!("bad fit id '{t}'"))))
                        .collect::<Result<_, _>>()?
                }
                other => return Err(bad(format!("unknown selector line '{other}'"))),
            }
        }
        let n_features_in = n_features_in.ok_or_else(|| bad("missing features line".into()))?;
        Ok(Selector { method, n_features_in, requested_k, kept, scores, fit_ids, flagged, rounds })
    }
}

fn check_fit_input(x: &[Vec<f64>], fit_ids: &[u64]) -> Result<usize, TransformError> {
    if x.is_empty() {
        return Err(TransformError::Invalid("empty fit set".into()));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(TransformError::Invalid("ragged feature rows".into()));
    }
    if fit_ids.len() != x.len() {
        return Err(TransformError::Invalid(format!(
            "{} fit ids for {} rows",
            fit_ids.len(),
            x.len()
        )));
    }
    Ok(p)
}

fn check_labels(x: &[Vec<f64>], y: &[usize]) -> Result<(), TransformError> {
    if y.len() != x.len() {
        return Err(TransformError::Invalid(format!("{} labels for {} rows", y.len(), x.len())));
    }
    if y.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(TransformError::Invalid("fit set has a single class".into()));
    }
    Ok(())
}

/// Drop features with no spread on the fit set (minimum equals maximum).
/// Scores are per-feature population variances.
pub fn fit_variance_filter(x: &[Vec<f64>], fit_ids: &[u64]) -> Result<Selector, TransformError> {
    let p = check_fit_input(x, fit_ids)?;
    let n = x.len() as f64;
    let mut kept = Vec::new();
    let mut scores = Vec::with_capacity(p);
    for j in 0..p {
        let column: Vec<f64> = x.iter().map(|row| row[j]).collect();
        let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = column.iter().sum::<f64>() / n;
        scores.push(column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
        if min < max {
            kept.push(j);
        }
    }
    Ok(Selector {
        method: SelectorMethod::Variance,
        n_features_in: p,
        requested_k: None,
        kept,
        scores,
        fit_ids: fit_ids.to_vec(),
        flagged: false,
        rounds: 0,
    })
}

/// One-way ANOVA F score per feature: between-class mean square over
/// within-class mean square. Zero within-class spread with any between-class
/// spread scores infinite; a completely constant feature scores zero.
fn anova_f_scores(x: &[Vec<f64>], y: &[usize]) -> Vec<f64> {
    let p = x[0].len();
    let n = x.len() as f64;
    let classes: BTreeSet<usize> = y.iter().copied().collect();
    let g = classes.len() as f64;
    let mut scores = Vec::with_capacity(p);
    for j in 0..p {
        let grand = x.iter().map(|row| row[j]).sum::<f64>() / n;
        let mut between = 0.0;
        let mut within = 0.0;
        for &class in &classes {
            let members: Vec<f64> =
                x.iter().zip(y).filter(|(_, &l)| l == class).map(|(row, _)| row[j]).collect();
            let m = members.len() as f64;
            let mean = members.iter().sum::<f64>() / m;
            between += m * (mean - grand) * (mean - grand);
            within += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        let ms_between = between / (g - 1.0);
        let ms_within = within / (n - g);
        scores.push(if ms_within > 0.0 {
            ms_between / ms_within
        } else if ms_between > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    scores
}

/// Rank positions by score descending, breaking ties toward the lower index.
fn top_k_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..k].to_vec();
    kept.sort_unstable();
    kept
}

/// Keep the k highest-scoring features by ANOVA F.
pub fn fit_univariate_select(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    fit_ids: &[u64],
) -> Result<Selector, TransformError> {
    let p = check_fit_input(x, fit_ids)?;
    check_labels(x, y)?;
    if k == 0 {
        return Err(TransformError::Invalid("k must be at least 1".into()));
    }
    if k > p {
        return Err(TransformError::KTooLarge { k, p });
    }
    let scores = anova_f_scores(x, y);
    Ok(Selector {
        method: SelectorMethod::UnivariateF,
        n_features_in: p,
        requested_k: Some(k),
        kept: top_k_by_score(&scores, k),
        scores,
        fit_ids: fit_ids.to_vec(),
        flagged: false,
        rounds: 0,
    })
}

/// Recursive elimination: fit a logistic model, drop the tenth of current
/// features (rounded up) with the smallest coefficient magnitudes — never
/// overshooting k, ties dropping the higher index — and repeat until k
/// remain. If the model will not train, fall back to univariate selection
/// over the surviving features and flag the result. The trainer is
/// deterministic, so no seed is involved.
pub fn fit_recursive_eliminate(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    k: usize,
    params: &LogisticParams,
    fit_ids: &[u64],
) -> Result<Selector, TransformError> {
    let p = check_fit_input(x, fit_ids)?;
    check_labels(x, y)?;
    if k == 0 {
        return Err(TransformError::Invalid("k must be at least 1".into()));
    }
    if k > p {
        return Err(TransformError::KTooLarge { k, p });
    }

    let project = |current: &[usize]| -> Vec<Vec<f64>> {
        x.iter().map(|row| current.iter().map(|&j| row[j]).collect()).collect()
    };
    let fallback = |current: &[usize], rounds: usize| -> Result<Selector, TransformError> {
        let sub = fit_univariate_select(&project(current), y, k, fit_ids)?;
        let mut scores = vec![0.0; p];
        for (pos, &j) in current.iter().enumerate() {
            scores[j] = sub.scores[pos];
        }
        Ok(Selector {
            method: SelectorMethod::Recursive,
            n_features_in: p,
            requested_k: Some(k),
            kept: sub.kept.iter().map(|&pos| current[pos]).collect(),
            scores,
            fit_ids: fit_ids.to_vec(),
            flagged: true,
            rounds,
        })
    };

    let mut current: Vec<usize> = (0..p).collect();
    let mut rounds = 0;
    while current.len() > k {
        let model = match LogisticModel::train(&project(&current), y, n_classes, params, fit_ids) {
            Ok(m) => m,
            Err(_) => return fallback(&current, rounds),
        };
        rounds += 1;
        let mags = model.coef_magnitudes();
        let drop_n = current.len().div_ceil(10).min(current.len() - k);
        // Ascending magnitude; equal magnitudes drop the higher original
        // index first.
        let mut order: Vec<usize> = (0..current.len()).collect();
        order.sort_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap().then(current[b].cmp(&current[a])));
        let doomed: BTreeSet<usize> = order[..drop_n].iter().map(|&pos| current[pos]).collect();
        current.retain(|j| !doomed.contains(j));
    }

    let model = match LogisticModel::train(&project(&current), y, n_classes, params, fit_ids) {
        Ok(m) => m,
        Err(_) => return fallback(&current, rounds),
    };
    let mut scores = vec![0.0; p];
    for (pos, &j) in current.iter().enumerate() {
        scores[j] = model.coef_magnitudes()[pos];
    }
    Ok(Selector {
        method: SelectorMethod::Recursive,
        n_features_in: p,
        requested_k: Some(k),
        kept: current,
        scores,
        fit_ids: fit_ids.to_vec(),
        flagged: false,
        rounds,
    })
}

/// What oversampling drew: every parent in a non-majority class with the
/// number of copies made of it (possibly zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    pub seed: u64,
    pub emitted: Vec<(u64, usize)>,
}

/// Bring every class up to the size of the largest by cloning uniformly drawn
/// members (with replacement, seeded). Returns only the new samples, with ids
/// allocated sequentially from `next_id`; each clone keeps its parent's
/// origin, so oversampling before a split is exactly the leak the auditor
/// catches.
pub fn oversample(
    samples: &[Sample],
    seed: u64,
    next_id: u64,
) -> Result<(Vec<Sample>, ResamplePlan), TransformError> {
    if samples.is_empty() {
        return Err(TransformError::Invalid("cannot oversample an empty view".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        by_class.entry(s.label).or_default().push(s);
    }
    let target = by_class.values().map(|v| v.len()).max().unwrap_or(0);
    let mut id = next_id;
    let mut copies = Vec::new();
    let mut emitted = Vec::new();
    for members in by_class.values() {
        if members.len() == target {
            continue;
        }
        let mut counts = vec![0usize; members.len()];
        for _ in members.len()..target {
            let pick = rng.gen_range(0..members.len());
            counts[pick] += 1;
            let parent = members[pick];
            copies.push(derive_sample(parent, parent.features.clone(), id)?);
            id += 1;
        }
        emitted.extend(members.iter().zip(counts).map(|(m, c)| (m.sample_id, c)));
    }
    Ok((copies, ResamplePlan { seed, emitted }))
}

/// Make `copies` jittered clones of every sample: Gaussian noise with per-
/// feature standard deviation `sigma_scale` times the feature's spread in
/// `samples`. A zero scale yields exact clones. Returns only the new
/// samples, ids sequential from `next_id`, origins pointing at the parents.
pub fn augment(
    samples: &[Sample],
    copies: usize,
    sigma_scale: f64,
    seed: u64,
    next_id: u64,
) -> Result<Vec<Sample>, TransformError> {
    if !(sigma_scale >= 0.0) {
        return Err(TransformError::Invalid(format!("bad sigma scale {sigma_scale}")));
    }
    if samples.is_empty() || copies == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = samples[0].features.len();
    let n = samples.len() as f64;
    let sigmas: Vec<f64> = (0..p)
        .map(|j| {
            let mean = samples.iter().map(|s| s.features[j]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s.features[j] - mean).powi(2)).sum::<f64>() / n;
            var.sqrt() * sigma_scale
        })
        .collect();
    let mut id = next_id;
    let mut out = Vec::with_capacity(samples.len() * copies);
    for parent in samples {
        for _ in 0..copies {
            let features: Vec<f64> = parent
                .features
                .iter()
                .zip(&sigmas)
                .map(|(&v, &sigma)| {
                    let noise: f64 = rng.sample(StandardNormal);
                    v + noise * sigma
                })
                .collect();
            out.push(derive_sample(parent, features, id)?);
            id += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::class_counts;

    fn ids(n: usize) -> Vec<u64> {
        (0..n as u64).collect()
    }

    // Four samples whose three features score F = 8, 0 (constant), and 2.5.
    fn f_dataset() -> (Vec<Vec<f64>>, Vec<usize>) {
        let x = vec![
            vec![0.0, 1.0, 0.0],
            vec![2.0, 1.0, 2.0],
            vec![4.0, 1.0, 3.0],
            vec![6.0, 1.0, 9.0],
        ];
        (x, vec![0, 0, 1, 1])
    }

    #[test]
    fn variance_filter_drops_constant_features() {
        let x = vec![vec![1.0, 5.0, 0.0], vec![2.0, 5.0, 0.5], vec![3.0, 5.0, 1.0]];
        let sel = fit_variance_filter(&x, &ids(3)).unwrap();
        assert_eq!(sel.kept, vec![0, 2]);
        assert_eq!(sel.scores[1], 0.0);
        assert!(sel.scores[0] > 0.0);
        assert_eq!(sel.requested_k, None);
    }

    #[test]
    fn variance_filter_can_drop_everything() {
        let x = vec![vec![3.7, 1.0], vec![3.7, 1.0]];
        let sel = fit_variance_filter(&x, &ids(2)).unwrap();
        assert!(sel.kept.is_empty());
        assert_eq!(sel.project(&[9.0, 9.0]).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn univariate_f_frozen_values() {
        let (x, y) = f_dataset();
        let sel = fit_univariate_select(&x, &y, 2, &ids(4)).unwrap();
        assert_eq!(sel.scores, vec![8.0, 0.0, 2.5]);
        assert_eq!(sel.kept, vec![0, 2]);
        let top = fit_univariate_select(&x, &y, 1, &ids(4)).unwrap();
        assert_eq!(top.kept, vec![0]);
    }

    #[test]
    fn univariate_f_two_versus_two_hand_case() {
        // Groups {1,2} vs {3,4}: between mean square 4, within 0.5.
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let sel = fit_univariate_select(&x, &[0, 0, 1, 1], 1, &ids(4)).unwrap();
        assert_eq!(sel.scores, vec![8.0]);
    }

    #[test]
    fn univariate_f_matches_algebraic_oracle() {
        // Independent identity: SSB = sum n_g m_g^2 - N m^2 and
        // SSW = sum x^2 - sum n_g m_g^2, computed from raw power sums.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let n = rng.gen_range(6..20);
            let x: Vec<Vec<f64>> =
                (0..n).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let scores = anova_f_scores(&x, &y);
            for j in 0..4 {
                let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let total: f64 = col.iter().sum();
                let total_sq: f64 = col.iter().map(|v| v * v).sum();
                let mut group_term = 0.0;
                let mut groups = 0.0;
                for class in 0..3 {
                    let members: Vec<f64> =
                        col.iter().zip(&y).filter(|(_, &l)| l == class).map(|(&v, _)| v).collect();
                    if members.is_empty() {
                        continue;
                    }
                    groups += 1.0;
                    let s: f64 = members.iter().sum();
                    group_term += s * s / members.len() as f64;
                }
                let nf = n as f64;
                let ssb = group_term - total * total / nf;
                let ssw = total_sq - group_term;
                let oracle = (ssb / (groups - 1.0)) / (ssw / (nf - groups));
                assert!((scores[j] - oracle).abs() < 1e-10, "{} vs {oracle}", scores[j]);
            }
        }
    }

    #[test]
    fn univariate_perfect_separation_scores_infinite() {
        let x = vec![vec![1.0, 3.0], vec![1.0, 1.0], vec![2.0, 4.0], vec![2.0, 0.0]];
        let y = vec![0, 0, 1, 1];
        let sel = fit_univariate_select(&x, &y, 1, &ids(4)).unwrap();
        assert!(sel.scores[0].is_infinite());
        assert_eq!(sel.kept, vec![0]);
    }

    #[test]
    fn univariate_ties_prefer_the_lower_index() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let y = vec![0, 0, 1, 1];
        let sel = fit_univariate_select(&x, &y, 1, &ids(4)).unwrap();
        assert_eq!(sel.kept, vec![0]);
    }

    #[test]
    fn univariate_rejects_bad_k_and_single_class() {
        let (x, y) = f_dataset();
        assert!(matches!(
            fit_univariate_select(&x, &y, 4, &ids(4)),
            Err(TransformError::KTooLarge { k: 4, p: 3 })
        ));
        assert!(fit_univariate_select(&x, &y, 0, &ids(4)).is_err());
        assert!(fit_univariate_select(&x, &[0, 0, 0, 0], 1, &ids(4)).is_err());
    }

    fn informative_dataset() -> (Vec<Vec<f64>>, Vec<usize>) {
        // Feature 2 carries the label; the rest cycle through small patterns.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let label = i % 2;
            x.push(vec![
                ((i * 7) % 5) as f64,
                ((i * 3) % 4) as f64,
                label as f64 * 2.0 - 1.0 + 0.01 * i as f64,
                ((i + 2) % 3) as f64,
                (i % 5) as f64,
            ]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn recursive_elimination_keeps_the_informative_feature() {
        let (x, y) = informative_dataset();
        let sel =
            fit_recursive_eliminate(&x, &y, 2, 1, &LogisticParams::default(), &ids(20)).unwrap();
        assert_eq!(sel.kept, vec![2]);
        assert!(!sel.flagged);
        assert_eq!(sel.rounds, 4, "5 -> 4 -> 3 -> 2 -> 1 features");
        assert!(sel.scores[2] > 0.0);
        assert_eq!(sel.scores[0], 0.0);
    }

    #[test]
    fn recursive_twelve_to_ten_is_one_round() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..24 {
            let label = i % 2;
            x.push((0..12).map(|j| ((i * (j + 2)) % 5) as f64 + (label * (j % 3)) as f64 * 0.3).collect());
            y.push(label);
        }
        let sel =
            fit_recursive_eliminate(&x, &y, 2, 10, &LogisticParams::default(), &ids(24)).unwrap();
        assert_eq!(sel.rounds, 1);
        assert_eq!(sel.kept.len(), 10);
    }

    #[test]
    fn recursive_k_equals_p_is_identity() {
        let (x, y) = informative_dataset();
        let sel =
            fit_recursive_eliminate(&x, &y, 2, 5, &LogisticParams::default(), &ids(20)).unwrap();
        assert_eq!(sel.kept, vec![0, 1, 2, 3, 4]);
        assert_eq!(sel.rounds, 0);
    }

    #[test]
    fn recursive_tie_drops_the_higher_index() {
        // Identical columns get identical coefficients under full-batch
        // descent from zero, so the tie rule decides who goes.
        let x = vec![
            vec![-1.0, -1.0],
            vec![-0.5, -0.5],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
        ];
        let y = vec![0, 0, 1, 1];
        let sel = fit_recursive_eliminate(&x, &y, 2, 1, &LogisticParams::default(), &ids(4)).unwrap();
        assert_eq!(sel.kept, vec![0]);
        assert!(!sel.flagged);
    }

    #[test]
    fn recursive_finds_planted_informative_pair_across_seeds() {
        // Two strong features among 98 noise columns; the pair should
        // survive elimination in at least 95 of 100 generated datasets.
        let params = LogisticParams { epochs: 120, ..LogisticParams::default() };
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = Vec::new();
            let mut y = Vec::new();
            for i in 0..60 {
                let label = i % 2;
                let mut row: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let signal = label as f64 * 2.0 - 1.0;
                row[17] = signal * 3.0 + rng.gen_range(-0.5..0.5);
                row[61] = -signal * 3.0 + rng.gen_range(-0.5..0.5);
                x.push(row);
                y.push(label);
            }
            let sel = fit_recursive_eliminate(&x, &y, 2, 2, &params, &ids(60)).unwrap();
            if sel.kept == vec![17, 61] {
                hits += 1;
            }
        }
        assert!(hits >= 95, "informative pair kept in only {hits} of 100 runs");
    }

    #[test]
    fn recursive_divergence_falls_back_to_univariate_and_flags() {
        let (x, y) = informative_dataset();
        let wild = LogisticParams { learning_rate: 1e308, epochs: 50, l2: 0.0 };
        let sel = fit_recursive_eliminate(&x, &y, 2, 2, &wild, &ids(20)).unwrap();
        assert!(sel.flagged);
        assert_eq!(sel.rounds, 0);
        let oracle = fit_univariate_select(&x, &y, 2, &ids(20)).unwrap();
        assert_eq!(sel.kept, oracle.kept);
    }

    #[test]
    fn oversample_balances_and_keeps_origins() {
        let mut samples = Vec::new();
        for i in 0..6 {
            samples.push(Sample::new(i, i, 0, vec![i as f64], 0));
        }
        samples.push(Sample::new(10, 10, 0, vec![10.0], 1));
        samples.push(Sample::new(11, 11, 0, vec![11.0], 1));
        let (copies, plan) = oversample(&samples, 0, 100).unwrap();
        assert_eq!(copies.len(), 4);
        for (i, c) in copies.iter().enumerate() {
            assert_eq!(c.sample_id, 100 + i as u64);
            assert_eq!(c.label, 1);
            assert!(c.origin_id == 10 || c.origin_id == 11);
            assert_eq!(c.features, samples.iter().find(|s| s.sample_id == c.origin_id).unwrap().features);
        }
        // Every minority parent appears in the plan and the counts add up.
        assert_eq!(plan.emitted.iter().map(|&(id, _)| id).collect::<Vec<_>>(), vec![10, 11]);
        assert_eq!(plan.emitted.iter().map(|&(_, c)| c).sum::<usize>(), 4);
        let mut merged = samples.clone();
        merged.extend(copies);
        let counts = class_counts(&merged);
        assert_eq!(counts[&0], 6);
        assert_eq!(counts[&1], 6);
    }

    #[test]
    fn oversample_balanced_input_is_a_no_op() {
        let samples: Vec<Sample> =
            (0..10).map(|i| Sample::new(i, i, 0, vec![0.0], (i % 2) as usize)).collect();
        let (copies, plan) = oversample(&samples, 3, 50).unwrap();
        assert!(copies.is_empty());
        assert!(plan.emitted.is_empty());
    }

    #[test]
    fn oversample_three_class_counts() {
        let mut samples = Vec::new();
        let mut id = 0;
        for (label, count) in [(0usize, 5usize), (1, 3), (2, 1)] {
            for _ in 0..count {
                samples.push(Sample::new(id, id, 0, vec![0.0], label));
                id += 1;
            }
        }
        let (copies, _) = oversample(&samples, 1, 50).unwrap();
        assert_eq!(copies.len(), 2 + 4);
        let labels: Vec<usize> = copies.iter().map(|c| c.label).collect();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 2);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 4);
    }

    #[test]
    fn oversample_rejects_empty_view_and_is_deterministic() {
        assert!(oversample(&[], 0, 0).is_err());
        let samples: Vec<Sample> =
            (0..9).map(|i| Sample::new(i, i, 0, vec![i as f64], usize::from(i > 5))).collect();
        let a = oversample(&samples, 7, 20).unwrap();
        let b = oversample(&samples, 7, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn augment_zero_sigma_gives_exact_clones() {
        let samples = vec![Sample::new(0, 0, 0, vec![1.0, 2.0], 0), Sample::new(1, 1, 0, vec![3.0, 4.0], 1)];
        let out = augment(&samples, 2, 0.0, 0, 10).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[0].features, vec![1.0, 2.0]);
        assert_eq!(out[0].origin_id, 0);
        assert_eq!(out[3].features, vec![3.0, 4.0]);
        assert_eq!(out[3].origin_id, 1);
        assert_eq!(out.iter().map(|s| s.sample_id).collect::<Vec<_>>(), vec![10, 11, 12, 13]);
    }

    #[test]
    fn augment_jitters_but_keeps_labels_and_origins() {
        let samples: Vec<Sample> =
            (0..8).map(|i| Sample::new(i, i, 0, vec![i as f64, -(i as f64)], usize::from(i % 2 == 0))).collect();
        let out = augment(&samples, 1, 0.1, 3, 100).unwrap();
        assert_eq!(out.len(), 8);
        for (parent, copy) in samples.iter().zip(&out) {
            assert_ne!(copy.features, parent.features);
            assert_eq!(copy.label, parent.label);
            assert_eq!(copy.origin_id, parent.sample_id);
        }
        let again = augment(&samples, 1, 0.1, 3, 100).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn augment_zero_copies_and_negative_sigma() {
        let samples = vec![Sample::new(0, 0, 0, vec![1.0], 0)];
        assert!(augment(&samples, 0, 0.5, 0, 10).unwrap().is_empty());
        assert!(augment(&samples, 1, -0.5, 0, 10).is_err());
    }

    #[test]
    fn projection_respects_kept_indices() {
        let (x, y) = f_dataset();
        let sel = fit_univariate_select(&x, &y, 2, &ids(4)).unwrap();
        assert_eq!(sel.project(&[9.0, 8.0, 7.0]).unwrap(), vec![9.0, 7.0]);
        assert!(sel.project(&[1.0]).is_err());
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(sel.project_names(&names), vec!["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn selector_text_round_trips() {
        let (x, y) = f_dataset();
        let selectors = vec![
            fit_variance_filter(&x, &ids(4)).unwrap(),
            fit_univariate_select(&x, &y, 2, &ids(4)).unwrap(),
            fit_recursive_eliminate(&x, &y, 2, 1, &LogisticParams::default(), &ids(4)).unwrap(),
        ];
        for sel in selectors {
            let text = sel.to_text();
            let back = Selector::from_text(&text).unwrap();
            assert_eq!(back, sel);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn selector_text_keeps_infinite_scores() {
        let x = vec![vec![1.0], vec![1.0], vec![2.0], vec![2.0]];
        let y = vec![0, 0, 1, 1];
        let sel = fit_univariate_select(&x, &y, 1, &ids(4)).unwrap();
        assert!(sel.scores[0].is_infinite());
        let back = Selector::from_text(&sel.to_text()).unwrap();
        assert!(back.scores[0].is_infinite());
    }
}
