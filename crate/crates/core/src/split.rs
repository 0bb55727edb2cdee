//! Train/validation/test splitting, nested cross-validation folds, and the
//! trace auditor that checks a run actually kept its parts independent.
//!
//! All randomness is a seeded shuffle; given the same dataset order,
//! fractions, and seed, every plan here is reproducible bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::trace::{StageKind, Trace};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("negative fraction {0}")]
    NegativeFraction(f64),
    #[error("fractions sum to {0}, expected 1")]
    FractionSum(f64),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("group split needs at least 3 non-empty groups when all fractions are positive, found {0}")]
    TooFewGroups(usize),
    #[error("infeasible folds: {0}")]
    InfeasibleFolds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    Random,
    Stratified,
    Group,
}

impl SplitStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SplitStrategy::Random => "random",
            SplitStrategy::Stratified => "stratified",
            SplitStrategy::Group => "group",
        }
    }
}

/// The three parts of a split, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl Part {
    pub fn name(&self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Validation => "validation",
            Part::Test => "test",
        }
    }
}

/// A concrete assignment of sample ids to the three parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub strategy: SplitStrategy,
    pub fractions: [f64; 3],
    pub seed: u64,
    pub train: BTreeSet<u64>,
    pub validation: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

impl SplitPlan {
    pub fn part_of(&self, sample_id: u64) -> Option<Part> {
        if self.train.contains(&sample_id) {
            Some(Part::Train)
        } else if self.validation.contains(&sample_id) {
            Some(Part::Validation)
        } else if self.test.contains(&sample_id) {
            Some(Part::Test)
        } else {
            None
        }
    }

    pub fn part_ids(&self, part: Part) -> &BTreeSet<u64> {
        match part {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
            Part::Test => &self.test,
        }
    }

    pub fn assignment(&self) -> BTreeMap<u64, Part> {
        let mut map = BTreeMap::new();
        for (&part, ids) in [Part::Train, Part::Validation, Part::Test]
            .iter()
            .zip([&self.train, &self.validation, &self.test])
        {
            for &id in ids {
                map.insert(id, part);
            }
        }
        map
    }

    /// Three-line text form, ids ascending within each part:
    ///
    /// ```text
    /// train: 0 2 5
    /// validation: 1
    /// test: 3 4
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, ids) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            out.push_str(name);
            out.push(':');
            for id in ids.iter() {
                let _ = write!(out, " {id}");
            }
            out.push('\n');
        }
        out
    }
}

/// Largest-remainder apportionment of `count` items over `fractions`.
/// Floors of the quotas are topped up in order of descending fractional
/// remainder; ties go to the earlier position.
pub fn apportion(count: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = Vec::with_capacity(fractions.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(fractions.len());
    let mut assigned = 0usize;
    for (i, &f) in fractions.iter().enumerate() {
        let quota = count as f64 * f;
        let base = quota.floor() as usize;
        sizes.push(base);
        remainders.push((quota - base as f64, i));
        assigned += base;
    }
    // Descending remainder; equal remainders resolve to the earlier index.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = count - assigned;
    for &(_, i) in &remainders {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

fn validate_fractions(fractions: &[f64; 3]) -> Result<(), SplitError> {
    for &f in fractions {
        if f < 0.0 || !f.is_finite() {
            return Err(SplitError::NegativeFraction(f));
        }
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::FractionSum(sum));
    }
    Ok(())
}

fn plan_from_slices(
    strategy: SplitStrategy,
    fractions: [f64; 3],
    seed: u64,
    parts: [Vec<u64>; 3],
) -> SplitPlan {
    let [train, validation, test] = parts;
    SplitPlan {
        strategy,
        fractions,
        seed,
        train: train.into_iter().collect(),
        validation: validation.into_iter().collect(),
        test: test.into_iter().collect(),
    }
}

/// Split preserving class proportions: within each class (ascending class
/// index), ids are shuffled by the seed and dealt to the parts in
/// largest-remainder proportions.
pub fn stratified_split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitPlan, SplitError> {
    if ds.samples.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    validate_fractions(&fractions)?;
    let mut by_class: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for s in &ds.samples {
        by_class.entry(s.label).or_default().push(s.sample_id);
    }
    for class in 0..ds.n_classes {
        if !by_class.contains_key(&class) {
            return Err(SplitError::EmptyClass(class));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<u64>; 3] = Default::default();
    for (_, ids) in by_class.iter_mut() {
        ids.shuffle(&mut rng);
        let sizes = apportion(ids.len(), &fractions);
        let mut offset = 0;
        for (part, &size) in parts.iter_mut().zip(&sizes) {
            part.extend_from_slice(&ids[offset..offset + size]);
            offset += size;
        }
    }
    Ok(plan_from_slices(SplitStrategy::Stratified, fractions, seed, parts))
}

/// Split ignoring both classes and groups: one seeded shuffle of all ids,
/// dealt in largest-remainder proportions.
pub fn random_split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitPlan, SplitError> {
    if ds.samples.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    validate_fractions(&fractions)?;
    let mut ids: Vec<u64> = ds.samples.iter().map(|s| s.sample_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let sizes = apportion(ids.len(), &fractions);
    let mut parts: [Vec<u64>; 3] = Default::default();
    let mut offset = 0;
    for (part, &size) in parts.iter_mut().zip(&sizes) {
        part.extend_from_slice(&ids[offset..offset + size]);
        offset += size;
    }
    Ok(plan_from_slices(SplitStrategy::Random, fractions, seed, parts))
}

/// Split keeping each group whole: groups are shuffled by the seed, then
/// greedily assigned to the part whose sample-count deficit (target minus
/// current size) is largest; ties go to train, then validation.
pub fn group_split(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<SplitPlan, SplitError> {
    if ds.samples.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    validate_fractions(&fractions)?;
    let mut by_group: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for s in &ds.samples {
        by_group.entry(s.group_id).or_default().push(s.sample_id);
    }
    if fractions.iter().all(|&f| f > 0.0) && by_group.len() < 3 {
        return Err(SplitError::TooFewGroups(by_group.len()));
    }
    let mut groups: Vec<(u64, Vec<u64>)> = by_group.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let total = ds.samples.len() as f64;
    let targets: Vec<f64> = fractions.iter().map(|f| f * total).collect();
    let mut sizes = [0usize; 3];
    let mut parts: [Vec<u64>; 3] = Default::default();
    for (_, ids) in groups {
        let mut best = 0;
        for i in 1..3 {
            // Strict comparison keeps the earlier part on ties.
            if targets[i] - sizes[i] as f64 > targets[best] - sizes[best] as f64 {
                best = i;
            }
        }
        sizes[best] += ids.len();
        parts[best].extend(ids);
    }
    Ok(plan_from_slices(SplitStrategy::Group, fractions, seed, parts))
}

/// One outer fold of a nested cross-validation plan.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterFold {
    pub test: BTreeSet<u64>,
    /// Validation sets partitioning this fold's training pool.
    pub inner_validation: Vec<BTreeSet<u64>>,
}

/// Nested cross-validation fold assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub outer_k: usize,
    pub inner_k: usize,
    pub grouped: bool,
    pub seed: u64,
    pub folds: Vec<OuterFold>,
}

impl FoldPlan {
    /// All ids not in fold `i`'s test set.
    pub fn outer_train(&self, i: usize) -> BTreeSet<u64> {
        let mut pool = BTreeSet::new();
        for (j, fold) in self.folds.iter().enumerate() {
            if j != i {
                pool.extend(fold.test.iter().copied());
            }
        }
        pool
    }

    /// The (train, validation) pairs of fold `i`.
    pub fn inner_pairs(&self, i: usize) -> Vec<(BTreeSet<u64>, BTreeSet<u64>)> {
        let pool = self.outer_train(i);
        self.folds[i]
            .inner_validation
            .iter()
            .map(|val| (pool.difference(val).copied().collect(), val.clone()))
            .collect()
    }
}

/// Deal ids into `k` cells: stratified per class when `grouped` is false,
/// whole groups balanced by sample count when true.
fn deal_into_folds(
    samples: &[(u64, usize, u64)], // (sample_id, label, group_id)
    k: usize,
    grouped: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<u64>> {
    let mut cells: Vec<Vec<u64>> = vec![Vec::new(); k];
    if grouped {
        let mut by_group: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &(id, _, group) in samples {
            by_group.entry(group).or_default().push(id);
        }
        let mut groups: Vec<(u64, Vec<u64>)> = by_group.into_iter().collect();
        groups.shuffle(rng);
        let target = samples.len() as f64 / k as f64;
        let mut sizes = vec![0usize; k];
        for (_, ids) in groups {
            let mut best = 0;
            for i in 1..k {
                if target - sizes[i] as f64 > target - sizes[best] as f64 {
                    best = i;
                }
            }
            sizes[best] += ids.len();
            cells[best].extend(ids);
        }
    } else {
        let fractions = vec![1.0 / k as f64; k];
        let mut by_class: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
        for &(id, label, _) in samples {
            by_class.entry(label).or_default().push(id);
        }
        for (_, ids) in by_class.iter_mut() {
            ids.shuffle(rng);
            let sizes = apportion(ids.len(), &fractions);
            let mut offset = 0;
            for (cell, &size) in cells.iter_mut().zip(&sizes) {
                cell.extend_from_slice(&ids[offset..offset + size]);
                offset += size;
            }
        }
    }
    cells
}

/// Build a nested cross-validation plan: `outer_k` test folds, and for each,
/// `inner_k` validation folds partitioning its training pool. Stratified per
/// class, or group-preserving and sample-balanced when `grouped`.
pub fn nested_cv(
    ds: &Dataset,
    outer_k: usize,
    inner_k: usize,
    seed: u64,
    grouped: bool,
) -> Result<FoldPlan, SplitError> {
    if ds.samples.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    if outer_k < 2 || inner_k < 2 {
        return Err(SplitError::InfeasibleFolds(format!(
            "outer_k and inner_k must be at least 2, got {outer_k} and {inner_k}"
        )));
    }
    let samples: Vec<(u64, usize, u64)> = ds.samples.iter().map(|s| (s.sample_id, s.label, s.group_id)).collect();
    let units = if grouped {
        samples.iter().map(|&(_, _, g)| g).collect::<BTreeSet<u64>>().len()
    } else {
        samples.len()
    };
    if units < outer_k {
        return Err(SplitError::InfeasibleFolds(format!(
            "{outer_k} outer folds need at least {outer_k} {}, found {units}",
            if grouped { "groups" } else { "samples" }
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outer_cells = deal_into_folds(&samples, outer_k, grouped, &mut rng);
    let mut folds = Vec::with_capacity(outer_k);
    for i in 0..outer_k {
        let test: BTreeSet<u64> = outer_cells[i].iter().copied().collect();
        let pool: Vec<(u64, usize, u64)> =
            samples.iter().filter(|(id, _, _)| !test.contains(id)).copied().collect();
        let pool_units = if grouped {
            pool.iter().map(|&(_, _, g)| g).collect::<BTreeSet<u64>>().len()
        } else {
            pool.len()
        };
        if pool_units < inner_k {
            return Err(SplitError::InfeasibleFolds(format!(
                "{inner_k} inner folds need at least {inner_k} {} in the fold-{i} pool, found {pool_units}",
                if grouped { "groups" } else { "samples" }
            )));
        }
        let inner_cells = deal_into_folds(&pool, inner_k, grouped, &mut rng);
        folds.push(OuterFold {
            test,
            inner_validation: inner_cells.into_iter().map(|c| c.into_iter().collect()).collect(),
        });
    }
    Ok(FoldPlan { outer_k, inner_k, grouped, seed, folds })
}

/// The independence property a trace violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    /// Samples sharing a root origin ended up in different parts.
    OriginOverlap,
    /// A declared group's samples ended up in different parts.
    GroupOverlap,
    /// A fitted transform's fit-set contains a non-train sample.
    TransformFittedOnNontrain,
}

impl ViolationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ViolationKind::OriginOverlap => "origin_overlap",
            ViolationKind::GroupOverlap => "group_overlap",
            ViolationKind::TransformFittedOnNontrain => "transform_fitted_on_nontrain",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Origin ids, group ids, or sample ids, depending on the kind.
    pub offending_ids: Vec<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }
}

/// Audit a trace for independence violations:
///
/// 1. an origin with samples in two different parts (duplicates or derived
///    copies crossing the split),
/// 2. a group with samples in two different parts, when the run declared
///    grouping,
/// 3. a fitted transform whose fit-set contains a sample that did not end up
///    in train.
///
/// Parts are taken from the final assignment; samples never assigned a part
/// are not counted against any rule.
pub fn audit_trace(trace: &Trace) -> AuditReport {
    let mut report = AuditReport::default();

    let mut origin_parts: BTreeMap<u64, BTreeSet<Part>> = BTreeMap::new();
    let mut group_parts: BTreeMap<u64, BTreeSet<Part>> = BTreeMap::new();
    for (&id, &part) in &trace.final_parts {
        if let Some(meta) = trace.sample_meta.get(&id) {
            origin_parts.entry(meta.origin_id).or_default().insert(part);
            group_parts.entry(meta.group_id).or_default().insert(part);
        }
    }

    let overlapping = |parts: &BTreeMap<u64, BTreeSet<Part>>| -> Vec<u64> {
        parts.iter().filter(|(_, p)| p.len() > 1).map(|(&id, _)| id).collect()
    };

    let origins = overlapping(&origin_parts);
    if !origins.is_empty() {
        report.violations.push(Violation {
            kind: ViolationKind::OriginOverlap,
            detail: format!("{} origin(s) have samples in more than one part", origins.len()),
            offending_ids: origins,
        });
    }

    if trace.grouped {
        let groups = overlapping(&group_parts);
        if !groups.is_empty() {
            report.violations.push(Violation {
                kind: ViolationKind::GroupOverlap,
                detail: format!("{} group(s) have samples in more than one part", groups.len()),
                offending_ids: groups,
            });
        }
    }

    for event in &trace.events {
        if event.kind != StageKind::SelectFit {
            continue;
        }
        let outside: Vec<u64> = event
            .fit_ids
            .iter()
            .copied()
            .filter(|id| matches!(trace.final_parts.get(id), Some(part) if *part != Part::Train))
            .collect();
        if !outside.is_empty() {
            report.violations.push(Violation {
                kind: ViolationKind::TransformFittedOnNontrain,
                detail: format!("stage {} was fitted on {} non-train sample(s)", event.stage, outside.len()),
                offending_ids: outside,
            });
        }
    }

    report
}
