//! Syntax tree for pipeline and scenario files, plus the canonical printer.

use super::Span;
use crate::models::ModelSpec;
use crate::split::SplitStrategy;
use crate::transforms::SelectorMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "accuracy" => Some(MetricKind::Accuracy),
            "precision" => Some(MetricKind::Precision),
            "recall" => Some(MetricKind::Recall),
            "f1" => Some(MetricKind::F1),
            _ => None,
        }
    }
}

/// One pipeline statement. Numeric hyperparameters omitted in the source are
/// filled with their defaults at parse time, so the tree is always fully
/// explicit.
#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Load { path: String },
    GroupBy { key: String },
    Split { strategy: SplitStrategy, fractions: [f64; 3] },
    Oversample,
    Augment { copies: usize, sigma_scale: f64 },
    Select { method: SelectorMethod, k: Option<usize> },
    Train { spec: ModelSpec },
    Evaluate { metrics: Vec<MetricKind> },
    Baseline,
    ExternalEval { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub stmt: Stmt,
    /// Position of the statement's keyword.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub name: String,
    pub statements: Vec<Statement>,
    /// Position of the closing brace; whole-pipeline findings anchor here.
    pub close_span: Span,
}

impl PipelineSpec {
    pub fn load_path(&self) -> Option<&str> {
        self.statements.iter().find_map(|s| match &s.stmt {
            Stmt::Load { path } => Some(path.as_str()),
            _ => None,
        })
    }

    /// Index and statement of the split, if declared.
    pub fn split(&self) -> Option<(usize, &Statement)> {
        self.statements
            .iter()
            .enumerate()
            .find(|(_, s)| matches!(s.stmt, Stmt::Split { .. }))
    }

    pub fn has_baseline(&self) -> bool {
        self.statements.iter().any(|s| matches!(s.stmt, Stmt::Baseline))
    }

    pub fn external_paths(&self) -> Vec<&str> {
        self.statements
            .iter()
            .filter_map(|s| match &s.stmt {
                Stmt::ExternalEval { path } => Some(path.as_str()),
                _ => None,
            })
            .collect()
    }

    /// The statement list without source positions; two pipelines that differ
    /// only in layout compare equal through this.
    pub fn shape(&self) -> Vec<Stmt> {
        self.statements.iter().map(|s| s.stmt.clone()).collect()
    }
}

/// A scenario file: which pitfall to reproduce, how many repetitions, and
/// either a leaky/correct arm pair or a single pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAst {
    pub name: String,
    pub kind: String,
    pub kind_span: Span,
    pub reps: usize,
    pub base_seed: u64,
    /// Generator knobs, in file order.
    pub gen: Vec<(String, f64)>,
    pub arms: ScenarioArms,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioArms {
    Pair { leaky: PipelineSpec, correct: PipelineSpec },
    Single { pipeline: PipelineSpec },
}

fn write_stmt(out: &mut String, stmt: &Stmt) {
    use std::fmt::Write as _;
    match stmt {
        Stmt::Load { path } => {
            let _ = write!(out, "load \"{path}\"");
        }
        Stmt::GroupBy { key } => {
            let _ = write!(out, "group_by {key}");
        }
        Stmt::Split { strategy, fractions } => {
            let _ = write!(
                out,
                "split {} {} {} {}",
                strategy.name(),
                fractions[0],
                fractions[1],
                fractions[2]
            );
        }
        Stmt::Oversample => out.push_str("oversample"),
        Stmt::Augment { copies, sigma_scale } => {
            let _ = write!(out, "augment {copies} {sigma_scale}");
        }
        Stmt::Select { method, k } => {
            let _ = write!(out, "select {}", method.name());
            if let Some(k) = k {
                let _ = write!(out, " {k}");
            }
        }
        Stmt::Train { spec } => match spec {
            ModelSpec::Majority => out.push_str("train majority"),
            ModelSpec::Logistic(p) => {
                let _ = write!(
                    out,
                    "train logistic lr={} epochs={} l2={}",
                    p.learning_rate, p.epochs, p.l2
                );
            }
            ModelSpec::Forest(p) => {
                let _ = write!(
                    out,
                    "train forest trees={} depth={} min_leaf={}",
                    p.n_trees, p.max_depth, p.min_samples_leaf
                );
            }
        },
        Stmt::Evaluate { metrics } => {
            out.push_str("evaluate");
            for m in metrics {
                out.push(' ');
                out.push_str(m.name());
            }
        }
        Stmt::Baseline => out.push_str("baseline majority"),
        Stmt::ExternalEval { path } => {
            let _ = write!(out, "external_eval \"{path}\"");
        }
    }
}

/// Canonical text form: one statement per line, two-space indent, every
/// hyperparameter spelled out. Re-parsing the output reproduces the same
/// statements, and printing is idempotent.
pub fn pretty_print(spec: &PipelineSpec) -> String {
    if spec.statements.is_empty() {
        return format!("pipeline \"{}\" {{ }}\n", spec.name);
    }
    let mut out = format!("pipeline \"{}\" {{\n", spec.name);
    for statement in &spec.statements {
        out.push_str("  ");
        write_stmt(&mut out, &statement.stmt);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}
