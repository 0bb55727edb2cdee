//! Synthetic dataset generators, one per scenario kind. Each builds a small
//! dataset whose structure makes a specific pipeline mistake visible: the
//! incorrect arm scores well for the wrong reason, the correct arm reports
//! what the data actually supports.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Dataset, Sample};

use super::{LabError, ScenarioKind};

/// Extra facts about what the generator planted, for probes that need to
/// look under the hood (e.g. attribution checks).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenMeta {
    /// Feature indices that encode the data source rather than the label.
    pub marker_features: Vec<usize>,
    /// Number of distinct groups, when the generator builds grouped data.
    pub n_groups: usize,
}

/// A generated dataset plus an optional external evaluation set.
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub dataset: Dataset,
    pub external: Option<Dataset>,
    pub meta: GenMeta,
}

/// Knob bag for generator parameters: every key must be consumed, so typos
/// in scenario files fail loudly instead of silently using defaults.
struct Knobs {
    kind: &'static str,
    map: BTreeMap<String, f64>,
}

impl Knobs {
    fn new(kind: &'static str, gen: &BTreeMap<String, f64>) -> Self {
        Knobs { kind, map: gen.clone() }
    }

    fn value(&mut self, key: &str, default: f64) -> f64 {
        self.map.remove(key).unwrap_or(default)
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, LabError> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => {
                if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
                    return Err(LabError::Gen(format!(
                        "gen knob '{key}' must be a whole non-negative number, got {v}"
                    )));
                }
                Ok(v as usize)
            }
        }
    }

    fn finish(self) -> Result<(), LabError> {
        if let Some(key) = self.map.keys().next() {
            return Err(LabError::Gen(format!(
                "unknown gen knob '{key}' for scenario kind '{}'",
                self.kind
            )));
        }
        Ok(())
    }
}

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn feature_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("f{i}")).collect()
}

fn build(samples: Vec<Sample>, p: usize) -> Result<Dataset, LabError> {
    Dataset::new(samples, feature_names(p), 2).map_err(|e| LabError::Gen(e.to_string()))
}

/// Imbalanced two-class data whose features carry no label signal at all.
/// Any minority performance above chance can only come from duplicated
/// samples leaking across the split.
fn gen_oversample(gen: &BTreeMap<String, f64>, seed: u64) -> Result<GenOutput, LabError> {
    let mut knobs = Knobs::new("oversample", gen);
    let n = knobs.count("n", 150)?;
    let minority = knobs.count("minority", 15)?;
    let p = knobs.count("features", 8)?;
    knobs.finish()?;
    if p == 0 {
        return Err(LabError::Gen("features must be at least 1".into()));
    }
    if minority < 2 || minority * 2 >= n {
        return Err(LabError::Gen(format!(
            "minority count {minority} must be at least 2 and below half of n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let label = usize::from((i as usize) < minority);
        let features: Vec<f64> = (0..p).map(|_| noise(&mut rng)).collect();
        samples.push(Sample::new(i, i, 0, features, label));
    }
    Ok(GenOutput { dataset: build(samples, p)?, external: None, meta: GenMeta::default() })
}

/// Balanced labels over a wide block of pure noise. With far more features
/// than samples, picking features on the full dataset finds columns that
/// happen to separate the labels everywhere — including the test part.
fn gen_featsel(gen: &BTreeMap<String, f64>, seed: u64) -> Result<GenOutput, LabError> {
    let mut knobs = Knobs::new("featsel", gen);
    let n = knobs.count("n", 40)?;
    let p = knobs.count("features", 2000)?;
    knobs.finish()?;
    if n < 4 {
        return Err(LabError::Gen("n must be at least 4".into()));
    }
    if p == 0 {
        return Err(LabError::Gen("features must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let label = usize::from((i as usize) >= n / 2);
        let features: Vec<f64> = (0..p).map(|_| noise(&mut rng)).collect();
        samples.push(Sample::new(i, i, 0, features, label));
    }
    Ok(GenOutput { dataset: build(samples, p)?, external: None, meta: GenMeta::default() })
}

/// Grouped data mimicking many recordings per subject: the label lives on
/// the group, two features carry a weak real signal, and the remaining
/// features carry a strong per-group fingerprint. A split that ignores
/// groups lets a model recognize subjects instead of the signal.
fn gen_patient(gen: &BTreeMap<String, f64>, seed: u64) -> Result<GenOutput, LabError> {
    let mut knobs = Knobs::new("patient", gen);
    let groups = knobs.count("groups", 30)?;
    let per_group = knobs.count("per_group", 20)?;
    let signal = knobs.value("signal", 0.5);
    let offset_sigma = knobs.value("offset_sigma", 3.0);
    knobs.finish()?;
    if groups < 6 {
        return Err(LabError::Gen("groups must be at least 6".into()));
    }
    if per_group < 2 {
        return Err(LabError::Gen("per_group must be at least 2".into()));
    }
    if !(signal >= 0.0) || !(offset_sigma >= 0.0) {
        return Err(LabError::Gen("signal and offset_sigma must be non-negative".into()));
    }
    const SIGNAL_DIMS: usize = 2;
    const FINGERPRINT_DIMS: usize = 8;
    let p = SIGNAL_DIMS + FINGERPRINT_DIMS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(groups * per_group);
    let mut id = 0u64;
    for g in 0..groups {
        let label = g % 2;
        let shift = if label == 1 { signal } else { -signal };
        let offsets: Vec<f64> =
            (0..FINGERPRINT_DIMS).map(|_| offset_sigma * noise(&mut rng)).collect();
        for _ in 0..per_group {
            let mut features = Vec::with_capacity(p);
            for _ in 0..SIGNAL_DIMS {
                features.push(shift + noise(&mut rng));
            }
            for offset in &offsets {
                features.push(offset + noise(&mut rng));
            }
            samples.push(Sample::new(id, g as u64, 0, features, label));
            id += 1;
        }
    }
    Ok(GenOutput {
        dataset: build(samples, p)?,
        external: None,
        meta: GenMeta { marker_features: Vec::new(), n_groups: groups },
    })
}

/// Balanced two-class data with one moderately informative feature. Jittered
/// copies are near-duplicates, so making them before the split effectively
/// shows the model its test points in advance.
fn gen_augment(gen: &BTreeMap<String, f64>, seed: u64) -> Result<GenOutput, LabError> {
    let mut knobs = Knobs::new("augment", gen);
    let n = knobs.count("n", 120)?;
    let p = knobs.count("features", 6)?;
    let signal = knobs.value("signal", 1.0);
    knobs.finish()?;
    if n < 4 {
        return Err(LabError::Gen("n must be at least 4".into()));
    }
    if p == 0 {
        return Err(LabError::Gen("features must be at least 1".into()));
    }
    if !(signal >= 0.0) {
        return Err(LabError::Gen("signal must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let label = usize::from((i as usize) >= n / 2);
        let shift = if label == 1 { signal } else { -signal };
        let mut features = Vec::with_capacity(p);
        features.push(shift + noise(&mut rng));
        for _ in 1..p {
            features.push(noise(&mut rng));
        }
        samples.push(Sample::new(i, i, 0, features, label));
    }
    Ok(GenOutput { dataset: build(samples, p)?, external: None, meta: GenMeta::default() })
}

/// Two internal sources whose identity coincides with the label, each with a
/// loud per-source marker feature. An external set from a third source flips
/// the marker assignment, so a model that learned the markers collapses on
/// it while internal evaluation looks excellent.
fn gen_batch(gen: &BTreeMap<String, f64>, seed: u64) -> Result<GenOutput, LabError> {
    let mut knobs = Knobs::new("batch", gen);
    let n = knobs.count("n", 400)?;
    let p = knobs.count("features", 10)?;
    let external_n = knobs.count("external_n", 100)?;
    let marker_scale = knobs.value("marker_scale", 3.0);
    let marker_sigma = knobs.value("marker_sigma", 0.1);
    knobs.finish()?;
    if n < 4 || external_n < 2 {
        return Err(LabError::Gen("n must be at least 4 and external_n at least 2".into()));
    }
    if p < 3 {
        return Err(LabError::Gen("features must be at least 3 (two markers plus noise)".into()));
    }
    if !(marker_scale > 0.0) || !(marker_sigma >= 0.0) {
        return Err(LabError::Gen("marker_scale must be positive, marker_sigma non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Markers occupy features 0 and 1; `hot` picks which one lights up.
    let row = |rng: &mut ChaCha8Rng, hot: usize| -> Vec<f64> {
        let mut features = Vec::with_capacity(p);
        for m in 0..2 {
            let center = if m == hot { marker_scale } else { 0.0 };
            features.push(center + marker_sigma * noise(rng));
        }
        for _ in 2..p {
            features.push(noise(rng));
        }
        features
    };
    let mut samples = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let label = usize::from((i as usize) >= n / 2);
        // Source coincides with the class; the marker follows the source.
        samples.push(Sample::new(i, i, label as u64, row(&mut rng, label), label));
    }
    let mut external = Vec::with_capacity(external_n);
    for j in 0..external_n as u64 {
        let id = 1_000_000 + j;
        let label = usize::from((j as usize) >= external_n / 2);
        // Third source: the marker assignment is swapped relative to the
        // internal sources, as happens when site conventions differ.
        external.push(Sample::new(id, id, 2, row(&mut rng, 1 - label), label));
    }
    Ok(GenOutput {
        dataset: build(samples, p)?,
        external: Some(build(external, p)?),
        meta: GenMeta { marker_features: vec![0, 1], n_groups: 0 },
    })
}

/// Generate the dataset for one scenario repetition.
pub fn generate(
    kind: ScenarioKind,
    gen: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<GenOutput, LabError> {
    match kind {
        ScenarioKind::Oversample => gen_oversample(gen, seed),
        ScenarioKind::Featsel => gen_featsel(gen, seed),
        ScenarioKind::Patient => gen_patient(gen, seed),
        ScenarioKind::Augment => gen_augment(gen, seed),
        ScenarioKind::Batch => gen_batch(gen, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knobs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn oversample_defaults_are_imbalanced_noise() {
        let out = generate(ScenarioKind::Oversample, &BTreeMap::new(), 3).unwrap();
        let counts = out.dataset.class_counts();
        assert_eq!(counts[&0], 135);
        assert_eq!(counts[&1], 15);
        assert_eq!(out.dataset.feature_names.len(), 8);
        assert!(out.external.is_none());
        // Label-independence: class means of the first feature stay close.
        let mean = |class: usize| {
            let rows: Vec<f64> = out
                .dataset
                .samples
                .iter()
                .filter(|s| s.label == class)
                .map(|s| s.features[0])
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        assert!((mean(0) - mean(1)).abs() < 0.8);
    }

    #[test]
    fn featsel_is_balanced_and_wide() {
        let out = generate(ScenarioKind::Featsel, &BTreeMap::new(), 9).unwrap();
        let counts = out.dataset.class_counts();
        assert_eq!(counts[&0], 20);
        assert_eq!(counts[&1], 20);
        assert_eq!(out.dataset.feature_names.len(), 2000);
    }

    #[test]
    fn patient_groups_share_a_label_and_a_fingerprint() {
        let out = generate(ScenarioKind::Patient, &BTreeMap::new(), 11).unwrap();
        assert_eq!(out.dataset.samples.len(), 600);
        assert_eq!(out.meta.n_groups, 30);
        for chunk in out.dataset.samples.chunks(20) {
            let g = chunk[0].group_id;
            assert!(chunk.iter().all(|s| s.group_id == g));
            assert!(chunk.iter().all(|s| s.label == chunk[0].label));
        }
        // Fingerprint dims dominate: between-group spread on a fingerprint
        // feature is far wider than on a signal feature.
        let group_mean = |g: u64, f: usize| {
            let rows: Vec<f64> = out
                .dataset
                .samples
                .iter()
                .filter(|s| s.group_id == g)
                .map(|s| s.features[f])
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        let spread = |f: usize| {
            let means: Vec<f64> = (0..30).map(|g| group_mean(g, f)).collect();
            let center = means.iter().sum::<f64>() / means.len() as f64;
            means.iter().map(|m| (m - center).powi(2)).sum::<f64>() / means.len() as f64
        };
        assert!(spread(5) > 4.0 * spread(0));
    }

    #[test]
    fn augment_plants_the_signal_in_the_first_feature() {
        let out = generate(ScenarioKind::Augment, &knobs(&[("signal", 2.0)]), 7).unwrap();
        let mean = |class: usize, f: usize| {
            let rows: Vec<f64> = out
                .dataset
                .samples
                .iter()
                .filter(|s| s.label == class)
                .map(|s| s.features[f])
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        assert!(mean(1, 0) - mean(0, 0) > 3.0);
        assert!((mean(1, 1) - mean(0, 1)).abs() < 1.0);
    }

    #[test]
    fn batch_flips_markers_on_the_external_source() {
        let out = generate(ScenarioKind::Batch, &BTreeMap::new(), 13).unwrap();
        let external = out.external.unwrap();
        assert_eq!(out.meta.marker_features, vec![0, 1]);
        assert_eq!(external.samples.len(), 100);
        assert!(external.samples.iter().all(|s| s.source_id == 2));
        for s in &out.dataset.samples {
            assert_eq!(s.source_id, s.label as u64);
            let hot = if s.label == 1 { 1 } else { 0 };
            assert!(s.features[hot] > 2.0 && s.features[1 - hot] < 1.0);
        }
        for s in &external.samples {
            let hot = if s.label == 1 { 0 } else { 1 };
            assert!(s.features[hot] > 2.0 && s.features[1 - hot] < 1.0);
        }
    }

    #[test]
    fn same_seed_reproduces_and_seeds_differ() {
        let a = generate(ScenarioKind::Augment, &BTreeMap::new(), 21).unwrap();
        let b = generate(ScenarioKind::Augment, &BTreeMap::new(), 21).unwrap();
        let c = generate(ScenarioKind::Augment, &BTreeMap::new(), 22).unwrap();
        assert_eq!(a.dataset.samples, b.dataset.samples);
        assert_ne!(a.dataset.samples, c.dataset.samples);
    }

    #[test]
    fn unknown_and_malformed_knobs_are_rejected() {
        let err = generate(ScenarioKind::Oversample, &knobs(&[("typo", 1.0)]), 0).unwrap_err();
        assert!(err.to_string().contains("unknown gen knob 'typo'"));
        let err =
            generate(ScenarioKind::Oversample, &knobs(&[("n", 10.5)]), 0).unwrap_err();
        assert!(err.to_string().contains("whole non-negative"));
        let err =
            generate(ScenarioKind::Oversample, &knobs(&[("minority", 80.0)]), 0).unwrap_err();
        assert!(err.to_string().contains("below half"));
    }
}
