//! The pipeline description language: a small keyword-driven text form for
//! declaring an analysis pipeline, plus a static linter that flags the
//! classic ways such pipelines leak information across the split.
//!
//! Parsing is all-or-nothing: a file either yields a full syntax tree or a
//! single error naming the first offending position.

mod ast;
mod lexer;
mod lint;
mod parser;

pub use ast::{pretty_print, MetricKind, PipelineSpec, ScenarioArms, ScenarioAst, Statement, Stmt};
pub use lint::{
    lint, render_diagnostics, DatasetSummary, Diagnostic, LintConfig, Severity,
};
pub use parser::{parse_scenario, parse_spec};

use thiserror::Error;

/// 1-based source position of a token or statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct DslError {
    pub message: String,
    pub span: Span,
}

impl DslError {
    pub(crate) fn new(message: impl Into<String>, span: Span) -> Self {
        DslError { message: message.into(), span }
    }
}
