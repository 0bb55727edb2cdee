//! Execution traces: what a pipeline actually did to which samples.
//!
//! A trace is a self-contained record — it carries the lineage metadata of
//! every sample it mentions — so an audit can run on the trace alone, without
//! the dataset or the pipeline that produced it.

use std::collections::BTreeMap;

use crate::split::Part;

/// What kind of work a stage performed, for audit purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageKind {
    #[default]
    Load,
    GroupBy,
    Split,
    Oversample,
    Augment,
    /// A transform that was fitted on a recorded fit-set (selectors).
    SelectFit,
    Train,
    Evaluate,
    ExternalEval,
}

/// One pipeline stage as it ran.
#[derive(Debug, Clone, Default)]
pub struct TraceEvent {
    pub kind: StageKind,
    /// Human-readable stage name, e.g. `select:univariate`.
    pub stage: String,
    /// Sample ids the stage consumed.
    pub inputs: Vec<u64>,
    /// Sample ids the stage produced or passed through.
    pub outputs: Vec<u64>,
    /// For fitted stages: the ids the fit actually saw.
    pub fit_ids: Vec<u64>,
    /// Part assignment at the time of the event; empty before any split.
    pub parts: BTreeMap<u64, Part>,
}

/// Per-sample lineage needed by the auditor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleMeta {
    pub origin_id: u64,
    pub group_id: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Lineage for every sample id that appears anywhere in the trace.
    pub sample_meta: BTreeMap<u64, SampleMeta>,
    /// Whether the run declared grouping (a `group_by` statement or a group
    /// split strategy). Group-integrity auditing only applies when it did.
    pub grouped: bool,
    pub events: Vec<TraceEvent>,
    /// Part assignment in force at the end of the run.
    pub final_parts: BTreeMap<u64, Part>,
}

impl Trace {
    pub fn register_sample(&mut self, sample_id: u64, origin_id: u64, group_id: u64) {
        self.sample_meta.insert(sample_id, SampleMeta { origin_id, group_id });
    }
}
