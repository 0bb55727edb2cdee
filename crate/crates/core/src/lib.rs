//! Leakage-safe ML experimentation toolkit.
//!
//! The crate has three jobs:
//!
//! 1. enforce and audit train/validation/test independence (splitting plans,
//!    lineage-aware audits),
//! 2. reproduce classic methodological pitfalls on synthetic, desk-scale data
//!    (resampling before splitting, augmentation before splitting, grouped
//!    records split at random, feature selection fitted on everything, and
//!    source/batch confounds), and
//! 3. lint a small pipeline DSL against an ordering checklist and interpret
//!    the same DSL permissively so static findings can be checked against a
//!    dynamic audit trace.

pub mod dataset;
pub mod dsl;
pub mod engine;
pub mod lab;
pub mod metrics;
pub mod models;
pub mod split;
pub mod trace;
pub mod transforms;
pub mod volumetrics;
