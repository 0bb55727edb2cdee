//! Scenario laboratory: typed scenarios, synthetic data generators, a paired
//! runner that compares a leaky arm against a correct arm over many
//! repetitions, and model attribution probes.

pub mod attribution;
pub mod generators;
pub mod runner;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{PipelineSpec, ScenarioArms, ScenarioAst, Stmt};

pub use attribution::{integrated_gradients, top_attribution, AttributionTarget};
pub use generators::{generate, GenMeta, GenOutput};
pub use runner::{
    run_batch_probe, run_pair, ArmScore, BatchRep, BatchReport, PairedReport, RepOutcome,
};

#[derive(Debug, Error)]
pub enum LabError {
    /// A generator rejected its configuration.
    #[error("{0}")]
    Gen(String),
    /// A scenario file is structurally unusable.
    #[error("{0}")]
    Scenario(String),
    /// A run-level failure outside individual repetitions.
    #[error("{0}")]
    Run(String),
}

/// The pitfall family a scenario demonstrates. The kind picks the generator
/// and the pair of report labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Oversample,
    Featsel,
    Patient,
    Augment,
    Batch,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Oversample => "oversample",
            ScenarioKind::Featsel => "featsel",
            ScenarioKind::Patient => "patient",
            ScenarioKind::Augment => "augment",
            ScenarioKind::Batch => "batch",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "oversample" => Some(ScenarioKind::Oversample),
            "featsel" => Some(ScenarioKind::Featsel),
            "patient" => Some(ScenarioKind::Patient),
            "augment" => Some(ScenarioKind::Augment),
            "batch" => Some(ScenarioKind::Batch),
            _ => None,
        }
    }

    /// Report label for the arm that commits the mistake.
    pub fn incorrect_label(&self) -> &'static str {
        match self {
            ScenarioKind::Oversample => "Incorrect oversampling",
            ScenarioKind::Featsel => "Incorrect feature selection",
            ScenarioKind::Patient => "Incorrect data split",
            ScenarioKind::Augment => "Incorrect data augmentation",
            ScenarioKind::Batch => "Incorrect data merging",
        }
    }

    /// Report label for the repaired arm; batch scenarios have no repaired
    /// arm, the probe itself shows the damage.
    pub fn correct_label(&self) -> Option<&'static str> {
        match self {
            ScenarioKind::Oversample => Some("Correct oversampling"),
            ScenarioKind::Featsel => Some("Correct feature selection"),
            ScenarioKind::Patient => Some("Correct data split"),
            ScenarioKind::Augment => Some("Correct data augmentation"),
            ScenarioKind::Batch => None,
        }
    }
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub reps: usize,
    pub base_seed: u64,
    pub gen: BTreeMap<String, f64>,
    pub arms: ScenarioArms,
}

fn non_split_multiset(spec: &PipelineSpec) -> Vec<String> {
    let mut stmts: Vec<String> = spec
        .statements
        .iter()
        .filter(|s| !matches!(s.stmt, Stmt::Split { .. }))
        .map(|s| format!("{:?}", s.stmt))
        .collect();
    stmts.sort();
    stmts
}

fn check_pair(leaky: &PipelineSpec, correct: &PipelineSpec) -> Result<(), LabError> {
    for (arm, spec) in [("leaky", leaky), ("correct", correct)] {
        let splits =
            spec.statements.iter().filter(|s| matches!(s.stmt, Stmt::Split { .. })).count();
        if splits != 1 {
            return Err(LabError::Scenario(format!(
                "the {arm} arm needs exactly one split statement, found {splits}"
            )));
        }
    }
    if non_split_multiset(leaky) != non_split_multiset(correct) {
        return Err(LabError::Scenario(
            "arms must contain the same statements apart from the split".into(),
        ));
    }
    let same_sequence = leaky
        .statements
        .iter()
        .map(|s| format!("{:?}", s.stmt))
        .eq(correct.statements.iter().map(|s| format!("{:?}", s.stmt)));
    if same_sequence {
        return Err(LabError::Scenario(
            "arms are identical; the comparison would measure nothing".into(),
        ));
    }
    Ok(())
}

impl Scenario {
    /// Validate a parsed scenario: known kind, the right arm shape for that
    /// kind, and arms that differ in exactly the way the comparison needs —
    /// same ingredients, different placement.
    pub fn from_ast(ast: &ScenarioAst) -> Result<Scenario, LabError> {
        let kind = ScenarioKind::from_name(&ast.kind).ok_or_else(|| {
            LabError::Scenario(format!("unknown scenario kind '{}'", ast.kind))
        })?;
        if ast.reps == 0 {
            return Err(LabError::Scenario("reps must be at least 1".into()));
        }
        match (&ast.arms, kind) {
            (ScenarioArms::Single { .. }, ScenarioKind::Batch) => {}
            (ScenarioArms::Pair { .. }, ScenarioKind::Batch) => {
                return Err(LabError::Scenario(
                    "batch scenarios take a single pipeline block, not leaky/correct arms".into(),
                ));
            }
            (ScenarioArms::Single { .. }, _) => {
                return Err(LabError::Scenario(format!(
                    "scenario kind '{}' compares a leaky and a correct arm",
                    kind.name()
                )));
            }
            (ScenarioArms::Pair { leaky, correct }, _) => check_pair(leaky, correct)?,
        }
        Ok(Scenario {
            name: ast.name.clone(),
            kind,
            reps: ast.reps,
            base_seed: ast.base_seed,
            gen: ast.gen.iter().cloned().collect(),
            arms: ast.arms.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_scenario;

    fn scenario(text: &str) -> Result<Scenario, LabError> {
        Scenario::from_ast(&parse_scenario(text).unwrap())
    }

    #[test]
    fn accepts_a_valid_pair() {
        let s = scenario(
            r#"scenario "demo" {
              kind oversample
              reps 4
              base_seed 9
              gen n=60 minority=10
              leaky { load "d" oversample split stratified 0.6 0.2 0.2 train forest evaluate f1 }
              correct { load "d" split stratified 0.6 0.2 0.2 oversample train forest evaluate f1 }
            }"#,
        )
        .unwrap();
        assert_eq!(s.kind, ScenarioKind::Oversample);
        assert_eq!(s.reps, 4);
        assert_eq!(s.gen[&"minority".to_string()], 10.0);
        assert_eq!(s.kind.incorrect_label(), "Incorrect oversampling");
    }

    #[test]
    fn patient_arms_may_differ_only_in_split_strategy() {
        let s = scenario(
            r#"scenario "subjects" {
              kind patient
              reps 2
              base_seed 1
              leaky { load "d" group_by subject split random 0.6 0.2 0.2 train forest evaluate f1 }
              correct { load "d" group_by subject split group 0.6 0.2 0.2 train forest evaluate f1 }
            }"#,
        );
        assert!(s.is_ok());
    }

    #[test]
    fn rejects_mismatched_arms() {
        let err = scenario(
            r#"scenario "bad" {
              kind oversample
              reps 2
              base_seed 1
              leaky { load "d" oversample split stratified 0.6 0.2 0.2 train forest evaluate f1 }
              correct { load "d" split stratified 0.6 0.2 0.2 train forest evaluate f1 }
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("same statements"));
    }

    #[test]
    fn rejects_identical_arms() {
        let err = scenario(
            r#"scenario "same" {
              kind augment
              reps 2
              base_seed 1
              leaky { load "d" augment 2 0.1 split random 0.6 0.2 0.2 train forest evaluate f1 }
              correct { load "d" augment 2 0.1 split random 0.6 0.2 0.2 train forest evaluate f1 }
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("identical"));
    }

    #[test]
    fn rejects_wrong_arm_shape_for_kind() {
        let err = scenario(
            r#"scenario "solo" {
              kind featsel
              reps 2
              base_seed 1
              pipeline { load "d" split stratified 0.6 0.2 0.2 train logistic evaluate accuracy }
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("compares a leaky and a correct arm"));
        let err = scenario(
            r#"scenario "paired" {
              kind batch
              reps 1
              base_seed 1
              leaky { load "d" split stratified 0.6 0.2 0.2 train logistic evaluate f1 }
              correct { load "d" split random 0.6 0.2 0.2 train logistic evaluate f1 }
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("single pipeline block"));
    }

    #[test]
    fn rejects_unknown_kind_and_zero_reps() {
        let err = scenario(
            r#"scenario "odd" {
              kind mystery
              reps 2
              base_seed 1
              pipeline { load "d" }
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown scenario kind"));
        // The parser refuses `reps 0` on its own; the lab-level guard covers
        // programmatically built scenarios.
        let mut ast = parse_scenario(
            r#"scenario "zero" {
              kind batch
              reps 1
              base_seed 1
              pipeline { load "d" }
            }"#,
        )
        .unwrap();
        ast.reps = 0;
        let err = Scenario::from_ast(&ast).unwrap_err();
        assert!(err.to_string().contains("reps must be at least 1"));
    }
}
