//! Executes a parsed pipeline against a dataset, statement by statement,
//! recording a provenance trace as it goes. The engine does exactly what the
//! pipeline says — including the leaky orderings — and leaves judgement to
//! the auditor.
//!
//! Before the split every data-touching statement sees the whole dataset;
//! after it they see only the training part. That one rule is what makes the
//! pitfall orderings faithful: `oversample` before `split` leaks, after it
//! does not.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataset::{Dataset, Sample};
use crate::dsl::{MetricKind, PipelineSpec, Span, Stmt};
use crate::metrics::{classification_metrics, ConfusionMatrix, Metrics};
use crate::models::{train_model, Model, ModelSpec};
use crate::split::{group_split, random_split, stratified_split, Part, SplitStrategy};
use crate::trace::{StageKind, Trace, TraceEvent};
use crate::transforms::{
    augment, fit_recursive_eliminate, fit_univariate_select, fit_variance_filter, oversample,
    Selector, SelectorMethod,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct EngineError {
    pub message: String,
    pub span: Span,
}

impl EngineError {
    fn new(message: impl Into<String>, span: Span) -> Self {
        EngineError { message: message.into(), span }
    }
}

/// One evaluation's worth of results. `requested` is what the statement asked
/// to report; the full metric set is always computed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub requested: Vec<MetricKind>,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub n: usize,
}

/// Everything a pipeline run produced, besides the trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecOutcome {
    pub evaluations: Vec<EvalRecord>,
    pub baselines: Vec<EvalRecord>,
    pub externals: Vec<EvalRecord>,
    /// The model left standing when the pipeline finished.
    pub model: Option<Model>,
    /// The selector stack in fit order; composing their projections maps raw
    /// feature rows into the space the model saw.
    pub selectors: Vec<Selector>,
}

/// Class treated as "positive" for precision/recall/F1.
pub const POSITIVE_CLASS: usize = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-statement seed: independent streams derived from the run seed and the
/// statement's position, so inserting a statement does not silently reuse a
/// neighbour's randomness.
fn stage_seed(seed: u64, stage: usize) -> u64 {
    splitmix64(seed ^ splitmix64(stage as u64))
}

struct Engine<'a> {
    data: &'a Dataset,
    external: Option<&'a Dataset>,
    samples: Vec<Sample>,
    loaded: bool,
    assignment: Option<BTreeMap<u64, Part>>,
    selectors: Vec<Selector>,
    model: Option<Model>,
    next_id: u64,
    trace: Trace,
    outcome: ExecOutcome,
}

impl Engine<'_> {
    /// Ids and samples the next fit is allowed to see: the training part
    /// once a split exists, the whole working set before.
    fn view(&self) -> Vec<&Sample> {
        match &self.assignment {
            Some(map) => self
                .samples
                .iter()
                .filter(|s| map.get(&s.sample_id) == Some(&Part::Train))
                .collect(),
            None => self.samples.iter().collect(),
        }
    }

    fn part_samples(&self, part: Part) -> Vec<&Sample> {
        match &self.assignment {
            Some(map) => {
                self.samples.iter().filter(|s| map.get(&s.sample_id) == Some(&part)).collect()
            }
            None => Vec::new(),
        }
    }

    fn project_row(&self, row: &[f64], span: Span) -> Result<Vec<f64>, EngineError> {
        let mut current = row.to_vec();
        for selector in &self.selectors {
            current =
                selector.project(&current).map_err(|e| EngineError::new(e.to_string(), span))?;
        }
        Ok(current)
    }

    fn projected(&self, samples: &[&Sample], span: Span) -> Result<Vec<Vec<f64>>, EngineError> {
        samples.iter().map(|s| self.project_row(&s.features, span)).collect()
    }

    fn adopt_copies(&mut self, copies: Vec<Sample>) {
        for copy in &copies {
            self.trace.register_sample(copy.sample_id, copy.origin_id, copy.group_id);
            // Copies are always derived from the current view; once a split
            // exists that view is the training part, so they stay in it.
            if let Some(map) = &mut self.assignment {
                map.insert(copy.sample_id, Part::Train);
            }
        }
        self.next_id += copies.len() as u64;
        self.samples.extend(copies);
    }

    fn evaluate_model(
        &self,
        model: &Model,
        samples: &[&Sample],
        requested: Vec<MetricKind>,
        span: Span,
    ) -> Result<EvalRecord, EngineError> {
        let x = self.projected(samples, span)?;
        let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let predicted =
            model.predict_batch(&x).map_err(|e| EngineError::new(e.to_string(), span))?;
        let (metrics, confusion) = classification_metrics(&truth, &predicted, POSITIVE_CLASS)
            .map_err(|e| EngineError::new(e.to_string(), span))?;
        Ok(EvalRecord { requested, metrics, confusion, n: samples.len() })
    }

    fn run_statement(&mut self, stmt: &Stmt, span: Span, seed: u64) -> Result<(), EngineError> {
        let fail = |e: &dyn std::fmt::Display| EngineError::new(e.to_string(), span);
        match stmt {
            Stmt::Load { path } => {
                self.samples = self.data.samples.clone();
                self.loaded = true;
                self.next_id =
                    self.samples.iter().map(|s| s.sample_id + 1).max().unwrap_or(0);
                for s in &self.samples {
                    self.trace.register_sample(s.sample_id, s.origin_id, s.group_id);
                }
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Load,
                    stage: format!("load {path}"),
                    outputs: self.samples.iter().map(|s| s.sample_id).collect(),
                    ..TraceEvent::default()
                });
            }
            Stmt::GroupBy { key } => {
                self.trace.grouped = true;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::GroupBy,
                    stage: format!("group_by {key}"),
                    ..TraceEvent::default()
                });
            }
            Stmt::Split { strategy, fractions } => {
                let working = Dataset::new_degenerate(
                    self.samples.clone(),
                    self.data.feature_names.clone(),
                    self.data.n_classes,
                )
                .map_err(|e| fail(&e))?;
                let plan = match strategy {
                    SplitStrategy::Random => random_split(&working, *fractions, seed),
                    SplitStrategy::Stratified => stratified_split(&working, *fractions, seed),
                    SplitStrategy::Group => group_split(&working, *fractions, seed),
                }
                .map_err(|e| fail(&e))?;
                let assignment = plan.assignment();
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Split,
                    stage: format!("split {}", strategy.name()),
                    inputs: self.samples.iter().map(|s| s.sample_id).collect(),
                    parts: assignment.clone(),
                    ..TraceEvent::default()
                });
                self.assignment = Some(assignment);
            }
            Stmt::Oversample => {
                let view = self.view();
                let view_ids: Vec<u64> = view.iter().map(|s| s.sample_id).collect();
                let owned: Vec<Sample> = view.into_iter().cloned().collect();
                let (copies, _plan) =
                    oversample(&owned, seed, self.next_id).map_err(|e| fail(&e))?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Oversample,
                    stage: "oversample".into(),
                    inputs: view_ids,
                    outputs: copies.iter().map(|s| s.sample_id).collect(),
                    ..TraceEvent::default()
                });
                self.adopt_copies(copies);
            }
            Stmt::Augment { copies, sigma_scale } => {
                let view = self.view();
                let view_ids: Vec<u64> = view.iter().map(|s| s.sample_id).collect();
                let owned: Vec<Sample> = view.into_iter().cloned().collect();
                let made = augment(&owned, *copies, *sigma_scale, seed, self.next_id)
                    .map_err(|e| fail(&e))?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Augment,
                    stage: format!("augment {copies} {sigma_scale}"),
                    inputs: view_ids,
                    outputs: made.iter().map(|s| s.sample_id).collect(),
                    ..TraceEvent::default()
                });
                self.adopt_copies(made);
            }
            Stmt::Select { method, k } => {
                let view = self.view();
                let fit_ids: Vec<u64> = view.iter().map(|s| s.sample_id).collect();
                let x = self.projected(&view, span)?;
                let y: Vec<usize> = view.iter().map(|s| s.label).collect();
                let selector = match (method, k) {
                    (SelectorMethod::Variance, _) => fit_variance_filter(&x, &fit_ids),
                    (SelectorMethod::UnivariateF, Some(k)) => {
                        fit_univariate_select(&x, &y, *k, &fit_ids)
                    }
                    (SelectorMethod::Recursive, Some(k)) => fit_recursive_eliminate(
                        &x,
                        &y,
                        self.data.n_classes,
                        *k,
                        &Default::default(),
                        &fit_ids,
                    ),
                    (_, None) => {
                        return Err(EngineError::new("selection method needs a count", span))
                    }
                }
                .map_err(|e| fail(&e))?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::SelectFit,
                    stage: format!("select {}", method.name()),
                    fit_ids,
                    ..TraceEvent::default()
                });
                self.selectors.push(selector);
            }
            Stmt::Train { spec } => {
                let view = self.view();
                let fit_ids: Vec<u64> = view.iter().map(|s| s.sample_id).collect();
                let x = self.projected(&view, span)?;
                let y: Vec<usize> = view.iter().map(|s| s.label).collect();
                let model = train_model(spec, &x, &y, self.data.n_classes, seed, &fit_ids)
                    .map_err(|e| fail(&e))?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Train,
                    stage: format!("train {}", spec.name()),
                    fit_ids,
                    ..TraceEvent::default()
                });
                self.model = Some(model);
            }
            Stmt::Evaluate { metrics } => {
                if self.assignment.is_none() {
                    return Err(EngineError::new("evaluate needs a split", span));
                }
                let Some(model) = &self.model else {
                    return Err(EngineError::new("evaluate needs a trained model", span));
                };
                let test = self.part_samples(Part::Test);
                if test.is_empty() {
                    return Err(EngineError::new("test part is empty", span));
                }
                let record = self.evaluate_model(model, &test, metrics.clone(), span)?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Evaluate,
                    stage: "evaluate".into(),
                    inputs: test.iter().map(|s| s.sample_id).collect(),
                    ..TraceEvent::default()
                });
                self.outcome.evaluations.push(record);
            }
            Stmt::Baseline => {
                if self.assignment.is_none() {
                    return Err(EngineError::new("baseline needs a split", span));
                }
                let view = self.view();
                let fit_ids: Vec<u64> = view.iter().map(|s| s.sample_id).collect();
                let x = self.projected(&view, span)?;
                let y: Vec<usize> = view.iter().map(|s| s.label).collect();
                let model =
                    train_model(&ModelSpec::Majority, &x, &y, self.data.n_classes, seed, &fit_ids)
                        .map_err(|e| fail(&e))?;
                let test = self.part_samples(Part::Test);
                if test.is_empty() {
                    return Err(EngineError::new("test part is empty", span));
                }
                let record = self.evaluate_model(&model, &test, Vec::new(), span)?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::Train,
                    stage: "baseline majority".into(),
                    fit_ids,
                    ..TraceEvent::default()
                });
                self.outcome.baselines.push(record);
            }
            Stmt::ExternalEval { path } => {
                let Some(model) = &self.model else {
                    return Err(EngineError::new("external_eval needs a trained model", span));
                };
                let Some(external) = self.external else {
                    return Err(EngineError::new(
                        format!("no external dataset bound for \"{path}\""),
                        span,
                    ));
                };
                let rows: Vec<&Sample> = external.samples.iter().collect();
                let record = self.evaluate_model(model, &rows, Vec::new(), span)?;
                self.trace.events.push(TraceEvent {
                    kind: StageKind::ExternalEval,
                    stage: format!("external_eval {path}"),
                    ..TraceEvent::default()
                });
                self.outcome.externals.push(record);
            }
        }
        Ok(())
    }
}

/// Run `spec` against `data`. The pipeline's `load` statement binds `data`
/// (its path is a label chosen by the caller); `external_eval` statements
/// bind `external`. Randomness comes only from `seed`, statement by
/// statement, so equal inputs give byte-equal traces and outcomes.
pub fn execute(
    spec: &PipelineSpec,
    data: &Dataset,
    seed: u64,
    external: Option<&Dataset>,
) -> Result<(Trace, ExecOutcome), EngineError> {
    if spec.load_path().is_none() {
        return Err(EngineError::new("pipeline has no load statement", spec.close_span));
    }
    let mut engine = Engine {
        data,
        external,
        samples: Vec::new(),
        loaded: false,
        assignment: None,
        selectors: Vec::new(),
        model: None,
        next_id: 0,
        trace: Trace::default(),
        outcome: ExecOutcome::default(),
    };
    for (index, statement) in spec.statements.iter().enumerate() {
        if !engine.loaded && !matches!(statement.stmt, Stmt::Load { .. } | Stmt::GroupBy { .. }) {
            return Err(EngineError::new("statement runs before any data is loaded", statement.span));
        }
        engine.run_statement(&statement.stmt, statement.span, stage_seed(seed, index))?;
    }
    engine.trace.final_parts = engine.assignment.unwrap_or_default();
    engine.outcome.model = engine.model;
    engine.outcome.selectors = engine.selectors;
    Ok((engine.trace, engine.outcome))
}
