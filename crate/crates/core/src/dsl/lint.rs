//! Static checks over a parsed pipeline: each finding is a stable code, a
//! severity, a source position, and a one-line explanation. With a dataset
//! summary alongside, the data-dependent checks join in.

use std::collections::BTreeMap;

use super::ast::{MetricKind, PipelineSpec, Stmt};
use super::Span;
use crate::dataset::Dataset;
use crate::split::SplitStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn name(&self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LintConfig {
    /// Class/source association above which the merged-sources finding
    /// fires.
    pub association_threshold: f64,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig { association_threshold: 0.9 }
    }
}

/// The handful of dataset facts the data-dependent checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub class_counts: BTreeMap<usize, usize>,
    /// True when any group holds two or more samples.
    pub multi_sample_groups: bool,
    pub n_sources: usize,
    /// Mean over sources of the fraction its majority class makes up,
    /// weighted by source size: 1.0 means each source carries one class.
    pub class_source_association: f64,
}

impl DatasetSummary {
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let mut class_counts = BTreeMap::new();
        let mut group_sizes: BTreeMap<u64, usize> = BTreeMap::new();
        let mut per_source: BTreeMap<u64, BTreeMap<usize, usize>> = BTreeMap::new();
        for sample in &dataset.samples {
            *class_counts.entry(sample.label).or_insert(0) += 1;
            *group_sizes.entry(sample.group_id).or_insert(0) += 1;
            *per_source.entry(sample.source_id).or_default().entry(sample.label).or_insert(0) += 1;
        }
        let n = dataset.samples.len();
        let aligned: usize =
            per_source.values().map(|counts| counts.values().copied().max().unwrap_or(0)).sum();
        DatasetSummary {
            class_counts,
            multi_sample_groups: group_sizes.values().any(|&c| c >= 2),
            n_sources: per_source.len(),
            class_source_association: if n == 0 { 0.0 } else { aligned as f64 / n as f64 },
        }
    }
}

/// Run every check against the pipeline, in code order, then sort by source
/// position (ties keep code order).
pub fn lint(
    spec: &PipelineSpec,
    summary: Option<&DatasetSummary>,
    config: &LintConfig,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let split = spec.split();

    let fires_before_split = |index: usize| split.is_some_and(|(at, _)| index < at);

    // P001..P003: transforms that run before the split see data destined for
    // validation and test.
    for (index, statement) in spec.statements.iter().enumerate() {
        if !fires_before_split(index) {
            continue;
        }
        match statement.stmt {
            Stmt::Oversample => out.push(Diagnostic {
                code: "P001",
                severity: Severity::Error,
                span: statement.span,
                message: "oversampling before the split copies samples into more than one part"
                    .into(),
            }),
            Stmt::Augment { .. } => out.push(Diagnostic {
                code: "P002",
                severity: Severity::Error,
                span: statement.span,
                message: "augmentation before the split places derived copies across parts".into(),
            }),
            Stmt::Select { .. } => out.push(Diagnostic {
                code: "P003",
                severity: Severity::Error,
                span: statement.span,
                message: "feature selection before the split is fitted on validation and test data"
                    .into(),
            }),
            _ => {}
        }
    }

    // P004: grouped data split by a strategy that can separate a group's
    // samples across parts.
    let groups_present = spec.statements.iter().any(|s| matches!(s.stmt, Stmt::GroupBy { .. }))
        || summary.is_some_and(|s| s.multi_sample_groups);
    if groups_present {
        if let Some((_, statement)) = split {
            if !matches!(statement.stmt, Stmt::Split { strategy: SplitStrategy::Group, .. }) {
                out.push(Diagnostic {
                    code: "P004",
                    severity: Severity::Error,
                    span: statement.span,
                    message: "grouped samples need a group-aware split to stay in one part".into(),
                });
            }
        }
    }

    // P005: accuracy as the only reported metric.
    for statement in &spec.statements {
        if let Stmt::Evaluate { metrics } = &statement.stmt {
            if metrics.as_slice() == [MetricKind::Accuracy] {
                out.push(Diagnostic {
                    code: "P005",
                    severity: Severity::Warning,
                    span: statement.span,
                    message: "accuracy is the only metric; imbalance can hide a useless model"
                        .into(),
                });
            }
        }
    }

    // P006: nothing to compare the model against.
    if !spec.has_baseline() {
        out.push(Diagnostic {
            code: "P006",
            severity: Severity::Warning,
            span: spec.close_span,
            message: "no baseline model; results cannot be judged against a trivial predictor"
                .into(),
        });
    }

    // P007: no held-out external check.
    if spec.external_paths().is_empty() {
        out.push(Diagnostic {
            code: "P007",
            severity: Severity::Info,
            span: spec.close_span,
            message: "no external evaluation set; performance may not transfer".into(),
        });
    }

    // P008: several sources whose labels line up with source membership.
    if let Some(summary) = summary {
        if summary.n_sources >= 2 && summary.class_source_association > config.association_threshold
        {
            out.push(Diagnostic {
                code: "P008",
                severity: Severity::Info,
                span: spec.close_span,
                message: format!(
                    "labels align with data sources (association {:.2}); the model may learn the source instead of the signal",
                    summary.class_source_association
                ),
            });
        }
    }

    out.sort_by_key(|d| d.span);
    out
}

/// Render findings one per line as `FILE:LINE:COL: severity CODE message`.
pub fn render_diagnostics(file: &str, diagnostics: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diagnostics {
        out.push_str(&format!(
            "{file}:{}:{}: {} {} {}\n",
            d.span.line,
            d.span.col,
            d.severity.name(),
            d.code,
            d.message
        ));
    }
    out
}
