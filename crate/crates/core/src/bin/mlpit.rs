use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlpit_core::dataset::{load_dataset, write_dataset, Dataset};
use mlpit_core::dsl::{
    lint, parse_scenario, parse_spec, render_diagnostics, DatasetSummary, LintConfig, MetricKind,
    Severity,
};
use mlpit_core::engine::execute;
use mlpit_core::lab::{generate, run_batch_probe, run_pair, Scenario, ScenarioKind};
use mlpit_core::metrics::{dice, iou, Metrics};
use mlpit_core::split::audit_trace;
use mlpit_core::volumetrics::{
    make_phantom, mask_from_bytes, mask_to_bytes, segment_lung_proxy, volume_from_bytes,
    volume_to_bytes, PhantomSpec,
};

#[derive(Parser)]
#[command(name = "mlpit", version, about = "Leakage-safe pipeline toolkit: run scenarios, execute and lint pipeline specs, generate synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and report the arm comparison or merge probe.
    Run {
        /// Scenario file.
        scenario: PathBuf,
        /// Override the repetition count from the file.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the base seed from the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the report and per-repetition rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one pipeline spec against a dataset and audit the run.
    Exec {
        /// Pipeline file.
        pipeline: PathBuf,
        /// Dataset bound to the pipeline's load statement.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset bound to external_eval statements.
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Check a pipeline spec for methodological pitfalls without running it.
    Lint {
        /// Pipeline file.
        pipeline: PathBuf,
        /// Dataset whose summary feeds the data-dependent checks.
        #[arg(long)]
        data_summary: Option<PathBuf>,
    },
    /// Generate a synthetic dataset of the given scenario kind.
    Gen {
        /// Scenario kind: oversample, featsel, patient, augment, or batch.
        kind: String,
        /// Generator knob, e.g. --set n=200 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
        /// Output file for the external set, for kinds that produce one.
        #[arg(long)]
        out_external: Option<PathBuf>,
    },
    /// Build a synthetic voxel volume and its ground-truth mask.
    Phantom {
        /// Grid dimensions.
        #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"])]
        dims: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Surface jitter amplitude.
        #[arg(long, default_value_t = 0.05)]
        jitter: f64,
        #[arg(long)]
        out_volume: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
    },
    /// Segment internal air from a volume and optionally score the mask.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        /// Output mask file.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth mask to score against.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Print overlap scores (requires --truth).
        #[arg(long)]
        report: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("mlpit: {message}");
            ExitCode::from(1)
        }
    }
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load_data(path: &Path) -> Result<Dataset, String> {
    load_dataset(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn metric_value(metrics: &Metrics, kind: MetricKind) -> f64 {
    match kind {
        MetricKind::Accuracy => metrics.accuracy,
        MetricKind::Precision => metrics.precision,
        MetricKind::Recall => metrics.recall,
        MetricKind::F1 => metrics.f1,
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn out_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".to_string(), |n| n.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { scenario, reps, seed, out } => {
            let text = read_text(&scenario)?;
            let ast = parse_scenario(&text)
                .map_err(|e| format!("{}:{e}", file_label(&scenario)))?;
            let mut spec = Scenario::from_ast(&ast).map_err(|e| e.to_string())?;
            if let Some(reps) = reps {
                if reps == 0 {
                    return Err("reps must be at least 1".into());
                }
                spec.reps = reps;
            }
            if let Some(seed) = seed {
                spec.base_seed = seed;
            }
            let (report_text, rows_csv) = if spec.kind == ScenarioKind::Batch {
                let report = run_batch_probe(&spec).map_err(|e| e.to_string())?;
                (report.to_text(), report.to_csv())
            } else {
                let report = run_pair(&spec).map_err(|e| e.to_string())?;
                (report.to_text(), report.to_csv())
            };
            print!("{report_text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
                let stem = out_stem(&scenario);
                write_bytes(&dir.join(format!("{stem}.report.txt")), report_text.as_bytes())?;
                write_bytes(&dir.join(format!("{stem}.rows.csv")), rows_csv.as_bytes())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Exec { pipeline, data, seed, external } => {
            let text = read_text(&pipeline)?;
            let spec =
                parse_spec(&text).map_err(|e| format!("{}:{e}", file_label(&pipeline)))?;
            let dataset = load_data(&data)?;
            let ext = external.map(|p| load_data(&p)).transpose()?;
            let (trace, outcome) = execute(&spec, &dataset, seed, ext.as_ref())
                .map_err(|e| format!("{}:{e}", file_label(&pipeline)))?;
            for (i, record) in outcome.evaluations.iter().enumerate() {
                let mut line = format!("evaluation {} (n={}):", i + 1, record.n);
                for kind in &record.requested {
                    line.push_str(&format!(
                        "  {} {:.4}",
                        kind.name(),
                        metric_value(&record.metrics, *kind)
                    ));
                }
                println!("{line}");
            }
            for (i, record) in outcome.baselines.iter().enumerate() {
                println!(
                    "baseline {} (n={}):  accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
                    i + 1,
                    record.n,
                    record.metrics.accuracy,
                    record.metrics.precision,
                    record.metrics.recall,
                    record.metrics.f1
                );
            }
            for (i, record) in outcome.externals.iter().enumerate() {
                println!(
                    "external {} (n={}):  accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
                    i + 1,
                    record.n,
                    record.metrics.accuracy,
                    record.metrics.precision,
                    record.metrics.recall,
                    record.metrics.f1
                );
            }
            let audit = audit_trace(&trace);
            if audit.is_clean() {
                println!("audit: clean");
            } else {
                println!("audit: {} violation(s)", audit.violations.len());
                for v in &audit.violations {
                    println!("  {}: {}", v.kind.name(), v.detail);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lint { pipeline, data_summary } => {
            let text = read_text(&pipeline)?;
            let spec =
                parse_spec(&text).map_err(|e| format!("{}:{e}", file_label(&pipeline)))?;
            let summary = data_summary
                .map(|p| load_data(&p).map(|ds| DatasetSummary::from_dataset(&ds)))
                .transpose()?;
            let diagnostics = lint(&spec, summary.as_ref(), &LintConfig::default());
            print!("{}", render_diagnostics(&file_label(&pipeline), &diagnostics));
            if diagnostics.iter().any(|d| d.severity == Severity::Error) {
                Ok(ExitCode::from(3))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Gen { kind, set, seed, out, out_external } => {
            let kind = ScenarioKind::from_name(&kind)
                .ok_or_else(|| format!("unknown scenario kind '{kind}'"))?;
            let mut knobs = BTreeMap::new();
            for pair in &set {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| format!("--set needs KEY=VALUE, got '{pair}'"))?;
                let value: f64 = value
                    .parse()
                    .map_err(|_| format!("--set value for '{key}' is not a number: '{value}'"))?;
                if knobs.insert(key.to_string(), value).is_some() {
                    return Err(format!("duplicate --set key '{key}'"));
                }
            }
            let output = generate(kind, &knobs, seed).map_err(|e| e.to_string())?;
            write_dataset(&output.dataset, &out).map_err(|e| e.to_string())?;
            println!("wrote {} samples to {}", output.dataset.samples.len(), out.display());
            match (output.external, out_external) {
                (Some(external), Some(path)) => {
                    write_dataset(&external, &path).map_err(|e| e.to_string())?;
                    println!("wrote {} external samples to {}", external.samples.len(), path.display());
                }
                (Some(_), None) => {
                    println!("note: this kind also produces an external set; pass --out-external to keep it");
                }
                (None, Some(_)) => {
                    return Err(format!(
                        "scenario kind '{}' produces no external set",
                        kind.name()
                    ));
                }
                (None, None) => {}
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Phantom { dims, seed, jitter, out_volume, out_truth } => {
            let dims = match dims {
                None => (64, 64, 48),
                Some(d) => (d[0], d[1], d[2]),
            };
            let spec = PhantomSpec::for_dims(dims, seed, jitter);
            let (grid, truth) = make_phantom(&spec).map_err(|e| e.to_string())?;
            write_bytes(&out_volume, &volume_to_bytes(&grid))?;
            write_bytes(&out_truth, &mask_to_bytes(&truth))?;
            println!(
                "phantom {}x{}x{}: {} lung voxels; volume {}, truth {}",
                dims.0,
                dims.1,
                dims.2,
                truth.count(),
                out_volume.display(),
                out_truth.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Segment { volume, out, truth, report } => {
            let grid = volume_from_bytes(&read_bytes(&volume)?).map_err(|e| e.to_string())?;
            let mask = segment_lung_proxy(&grid);
            write_bytes(&out, &mask_to_bytes(&mask))?;
            println!("wrote mask to {} ({} voxels)", out.display(), mask.count());
            if report && truth.is_none() {
                return Err("--report needs --truth to score against".into());
            }
            if let (true, Some(truth_path)) = (report, truth) {
                let truth_mask =
                    mask_from_bytes(&read_bytes(&truth_path)?).map_err(|e| e.to_string())?;
                let dice_score = dice(&mask, &truth_mask).map_err(|e| e.to_string())?;
                let iou_score = iou(&mask, &truth_mask).map_err(|e| e.to_string())?;
                let mut intersection = 0usize;
                for (&a, &b) in mask.bits.iter().zip(&truth_mask.bits) {
                    if a && b {
                        intersection += 1;
                    }
                }
                let truth_count = truth_mask.count();
                let extra = if truth_count == 0 {
                    f64::NAN
                } else {
                    (mask.count() - intersection) as f64 / truth_count as f64
                };
                println!(
                    "dice {:.4}  iou {:.4}  extra voxels {:.1}% of truth",
                    dice_score.value,
                    iou_score.value,
                    100.0 * extra
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
