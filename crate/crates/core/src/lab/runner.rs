//! Paired scenario execution: run the leaky and correct arm on the same
//! generated data across many repetitions, then compare the score
//! distributions. Repetitions run in parallel but the output is assembled by
//! repetition index, so reports are byte-stable regardless of thread count.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::dsl::ScenarioArms;
use crate::engine::{execute, ExecOutcome};
use crate::metrics::{wilcoxon_ranksum, RankSumMethod, RankSumResult};
use crate::models::Model;

use super::attribution::{integrated_gradients, top_attribution, AttributionTarget};
use super::generators::generate;
use super::{LabError, Scenario, ScenarioKind};

/// Scores one arm earned in one repetition, from its final evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmScore {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n: usize,
}

/// Outcome of one repetition; either arm may fail without sinking the run.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub leaky: Result<ArmScore, String>,
    pub correct: Result<ArmScore, String>,
}

/// Aggregated result of a paired scenario run.
#[derive(Debug, Clone)]
pub struct PairedReport {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub base_seed: u64,
    pub rows: Vec<RepOutcome>,
    /// Repetitions where both arms produced a score.
    pub n_paired: usize,
    pub n_failed: usize,
    pub leaky_mean_accuracy: f64,
    pub leaky_mean_f1: f64,
    pub correct_mean_accuracy: f64,
    pub correct_mean_f1: f64,
    /// Leaky minus correct, over paired repetitions.
    pub f1_gap: f64,
    pub accuracy_gap: f64,
    /// Rank-sum comparison of the per-repetition F1 scores; absent when no
    /// repetition completed on both arms.
    pub ranksum: Option<RankSumResult>,
}

fn score_from(outcome: &ExecOutcome) -> Result<ArmScore, String> {
    let record = outcome.evaluations.last().ok_or("arm produced no evaluation")?;
    Ok(ArmScore {
        accuracy: record.metrics.accuracy,
        precision: record.metrics.precision,
        recall: record.metrics.recall,
        f1: record.metrics.f1,
        n: record.n,
    })
}

fn mean<F: Fn(&ArmScore) -> f64>(scores: &[ArmScore], pick: F) -> f64 {
    if scores.is_empty() {
        return f64::NAN;
    }
    scores.iter().map(pick).sum::<f64>() / scores.len() as f64
}

fn method_name(method: RankSumMethod) -> &'static str {
    match method {
        RankSumMethod::Exact => "exact",
        RankSumMethod::NormalApprox => "normal approximation",
    }
}

fn csv_escape(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Run both arms of a paired scenario. Repetition `i` generates its dataset
/// with seed `base_seed + i` and hands the same seed to both arms, so the
/// only difference between the arms is the pipeline itself.
pub fn run_pair(scenario: &Scenario) -> Result<PairedReport, LabError> {
    let (leaky, correct) = match &scenario.arms {
        ScenarioArms::Pair { leaky, correct } => (leaky, correct),
        ScenarioArms::Single { .. } => {
            return Err(LabError::Run(
                "batch scenarios use the merge probe, not the paired runner".into(),
            ));
        }
    };
    let rows: Vec<RepOutcome> = (0..scenario.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = scenario.base_seed.wrapping_add(rep as u64);
            match generate(scenario.kind, &scenario.gen, seed) {
                Err(e) => RepOutcome {
                    rep,
                    seed,
                    leaky: Err(e.to_string()),
                    correct: Err(e.to_string()),
                },
                Ok(out) => {
                    let run = |spec| {
                        execute(spec, &out.dataset, seed, out.external.as_ref())
                            .map_err(|e| e.to_string())
                            .and_then(|(_, outcome)| score_from(&outcome))
                    };
                    RepOutcome { rep, seed, leaky: run(leaky), correct: run(correct) }
                }
            }
        })
        .collect();
    let paired: Vec<(ArmScore, ArmScore)> = rows
        .iter()
        .filter_map(|r| match (&r.leaky, &r.correct) {
            (Ok(l), Ok(c)) => Some((*l, *c)),
            _ => None,
        })
        .collect();
    let leaky_scores: Vec<ArmScore> = paired.iter().map(|(l, _)| *l).collect();
    let correct_scores: Vec<ArmScore> = paired.iter().map(|(_, c)| *c).collect();
    let leaky_f1: Vec<f64> = leaky_scores.iter().map(|s| s.f1).collect();
    let correct_f1: Vec<f64> = correct_scores.iter().map(|s| s.f1).collect();
    let ranksum =
        if paired.is_empty() { None } else { wilcoxon_ranksum(&leaky_f1, &correct_f1).ok() };
    let leaky_mean_accuracy = mean(&leaky_scores, |s| s.accuracy);
    let leaky_mean_f1 = mean(&leaky_scores, |s| s.f1);
    let correct_mean_accuracy = mean(&correct_scores, |s| s.accuracy);
    let correct_mean_f1 = mean(&correct_scores, |s| s.f1);
    Ok(PairedReport {
        scenario: scenario.name.clone(),
        kind: scenario.kind,
        base_seed: scenario.base_seed,
        n_paired: paired.len(),
        n_failed: rows.len() - paired.len(),
        rows,
        leaky_mean_accuracy,
        leaky_mean_f1,
        correct_mean_accuracy,
        correct_mean_f1,
        f1_gap: leaky_mean_f1 - correct_mean_f1,
        accuracy_gap: leaky_mean_accuracy - correct_mean_accuracy,
        ranksum,
    })
}

impl PairedReport {
    /// Human-readable summary table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {} ({})\n", self.scenario, self.kind.name()));
        out.push_str(&format!(
            "repetitions: {}  base seed: {}  paired: {}  failed: {}\n\n",
            self.rows.len(),
            self.base_seed,
            self.n_paired,
            self.n_failed
        ));
        out.push_str(&format!("{:<32} {:>13} {:>9}\n", "approach", "mean accuracy", "mean F1"));
        out.push_str(&format!(
            "{:<32} {:>13.4} {:>9.4}\n",
            self.kind.incorrect_label(),
            self.leaky_mean_accuracy,
            self.leaky_mean_f1
        ));
        out.push_str(&format!(
            "{:<32} {:>13.4} {:>9.4}\n\n",
            self.kind.correct_label().unwrap_or("Correct variant"),
            self.correct_mean_accuracy,
            self.correct_mean_f1
        ));
        out.push_str(&format!("F1 gap (incorrect - correct): {:.4}\n", self.f1_gap));
        out.push_str(&format!("accuracy gap (incorrect - correct): {:.4}\n", self.accuracy_gap));
        match &self.ranksum {
            Some(r) => out.push_str(&format!(
                "rank-sum statistic: {:.4}  p-value: {:.3e}  method: {}\n",
                r.statistic,
                r.p_value,
                method_name(r.method)
            )),
            None => out.push_str("rank-sum comparison: not available (no paired repetitions)\n"),
        }
        out
    }

    /// Per-repetition scores as delimited rows, one line per arm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,seed,arm,approach,accuracy,precision,recall,f1,n,error\n");
        for row in &self.rows {
            let arms = [
                ("leaky", self.kind.incorrect_label(), &row.leaky),
                ("correct", self.kind.correct_label().unwrap_or("Correct variant"), &row.correct),
            ];
            for (arm, label, result) in arms {
                match result {
                    Ok(s) => out.push_str(&format!(
                        "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},\n",
                        row.rep,
                        row.seed,
                        arm,
                        csv_escape(label),
                        s.accuracy,
                        s.precision,
                        s.recall,
                        s.f1,
                        s.n
                    )),
                    Err(e) => out.push_str(&format!(
                        "{},{},{},{},,,,,,{}\n",
                        row.rep,
                        row.seed,
                        arm,
                        csv_escape(label),
                        csv_escape(e)
                    )),
                }
            }
        }
        out
    }
}

/// One repetition of the merge probe.
#[derive(Debug, Clone)]
pub struct BatchRep {
    pub rep: usize,
    pub seed: u64,
    pub result: Result<BatchScore, String>,
}

/// Scores from one merge-probe repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchScore {
    pub internal: ArmScore,
    pub external: ArmScore,
    /// External samples whose strongest attribution lands on a source-marker
    /// feature.
    pub attribution_hits: usize,
    pub attribution_total: usize,
}

/// Aggregated result of a merge-probe run.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub scenario: String,
    pub base_seed: u64,
    pub rows: Vec<BatchRep>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub internal_mean_accuracy: f64,
    pub internal_mean_f1: f64,
    pub external_mean_accuracy: f64,
    pub external_mean_f1: f64,
    pub attribution_hits: usize,
    pub attribution_total: usize,
}

/// Map an index in the selector-projected feature space back to the original
/// column index.
fn original_index(selectors: &[crate::transforms::Selector], mut index: usize) -> usize {
    for selector in selectors.iter().rev() {
        index = selector.kept[index];
    }
    index
}

fn batch_score(
    external_set: &Dataset,
    outcome: &ExecOutcome,
    markers: &[usize],
) -> Result<BatchScore, String> {
    let internal = score_from(outcome)?;
    let ext_record = outcome.externals.last().ok_or("pipeline has no external_eval")?;
    let external = ArmScore {
        accuracy: ext_record.metrics.accuracy,
        precision: ext_record.metrics.precision,
        recall: ext_record.metrics.recall,
        f1: ext_record.metrics.f1,
        n: ext_record.n,
    };
    let model = match &outcome.model {
        Some(Model::Logistic(m)) => m,
        Some(_) => return Err("the merge probe needs a logistic model".into()),
        None => return Err("pipeline trained no model".into()),
    };
    let mut hits = 0;
    let mut total = 0;
    for sample in &external_set.samples {
        let mut row = sample.features.clone();
        for selector in &outcome.selectors {
            row = selector.project(&row).map_err(|e| e.to_string())?;
        }
        let baseline = vec![0.0; row.len()];
        let attr = integrated_gradients(model, &row, &baseline, 1, AttributionTarget::Logit)
            .map_err(|e| e.to_string())?;
        let top = original_index(&outcome.selectors, top_attribution(&attr));
        total += 1;
        if markers.contains(&top) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err("no external samples to attribute".into());
    }
    Ok(BatchScore { internal, external, attribution_hits: hits, attribution_total: total })
}

/// Run a single-pipeline merge scenario: evaluate internally, evaluate on
/// the external set, and check which features the model actually leans on.
pub fn run_batch_probe(scenario: &Scenario) -> Result<BatchReport, LabError> {
    let pipeline = match &scenario.arms {
        ScenarioArms::Single { pipeline } => pipeline,
        ScenarioArms::Pair { .. } => {
            return Err(LabError::Run(
                "paired scenarios use the paired runner, not the merge probe".into(),
            ));
        }
    };
    let rows: Vec<BatchRep> = (0..scenario.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = scenario.base_seed.wrapping_add(rep as u64);
            let result = generate(scenario.kind, &scenario.gen, seed)
                .map_err(|e| e.to_string())
                .and_then(|out| {
                    let external = out
                        .external
                        .as_ref()
                        .ok_or("generator produced no external set")?;
                    let (_, outcome) = execute(pipeline, &out.dataset, seed, Some(external))
                        .map_err(|e| e.to_string())?;
                    batch_score(external, &outcome, &out.meta.marker_features)
                });
            BatchRep { rep, seed, result }
        })
        .collect();
    let ok: Vec<BatchScore> = rows.iter().filter_map(|r| r.result.clone().ok()).collect();
    let internal: Vec<ArmScore> = ok.iter().map(|s| s.internal).collect();
    let external: Vec<ArmScore> = ok.iter().map(|s| s.external).collect();
    Ok(BatchReport {
        scenario: scenario.name.clone(),
        base_seed: scenario.base_seed,
        n_ok: ok.len(),
        n_failed: rows.len() - ok.len(),
        internal_mean_accuracy: mean(&internal, |s| s.accuracy),
        internal_mean_f1: mean(&internal, |s| s.f1),
        external_mean_accuracy: mean(&external, |s| s.accuracy),
        external_mean_f1: mean(&external, |s| s.f1),
        attribution_hits: ok.iter().map(|s| s.attribution_hits).sum(),
        attribution_total: ok.iter().map(|s| s.attribution_total).sum(),
        rows,
    })
}

impl BatchReport {
    /// Fraction of external samples whose prediction keyed on a marker.
    pub fn attribution_fraction(&self) -> f64 {
        if self.attribution_total == 0 {
            f64::NAN
        } else {
            self.attribution_hits as f64 / self.attribution_total as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {} (batch)\n", self.scenario));
        out.push_str("approach: Incorrect data merging\n");
        out.push_str(&format!(
            "repetitions: {}  base seed: {}  failed: {}\n\n",
            self.rows.len(),
            self.base_seed,
            self.n_failed
        ));
        out.push_str(&format!(
            "internal test -- mean accuracy: {:.4}  mean F1: {:.4}\n",
            self.internal_mean_accuracy, self.internal_mean_f1
        ));
        out.push_str(&format!(
            "external set  -- mean accuracy: {:.4}  mean F1: {:.4}\n",
            self.external_mean_accuracy, self.external_mean_f1
        ));
        out.push_str(&format!(
            "marker attribution: {} of {} external predictions keyed on a source marker ({:.1}%)\n",
            self.attribution_hits,
            self.attribution_total,
            100.0 * self.attribution_fraction()
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "rep,seed,internal_accuracy,internal_f1,external_accuracy,external_f1,attribution_hits,attribution_total,error\n",
        );
        for row in &self.rows {
            match &row.result {
                Ok(s) => out.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{:.6},{},{},\n",
                    row.rep,
                    row.seed,
                    s.internal.accuracy,
                    s.internal.f1,
                    s.external.accuracy,
                    s.external.f1,
                    s.attribution_hits,
                    s.attribution_total
                )),
                Err(e) => out.push_str(&format!(
                    "{},{},,,,,,,{}\n",
                    row.rep,
                    row.seed,
                    csv_escape(e)
                )),
            }
        }
        out
    }
}
