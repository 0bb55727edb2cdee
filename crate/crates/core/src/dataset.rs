//! Tabular sample store with per-sample provenance.
//!
//! Every sample carries three lineage fields on top of its id:
//!
//! * `origin_id` — the root ancestor a sample was derived from. Copies made
//!   by resampling or augmentation keep the origin of their parent, so a
//!   later audit can tell that two "different" samples are really the same
//!   underlying observation.
//! * `group_id` — the unit that must not be divided across parts (a patient,
//!   a site, a recording session). Defaults to the sample id when the input
//!   has no group column.
//! * `source_id` — the acquisition source (center, archive, scanner), used
//!   to detect class/source confounding.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Parse failure in a dataset file; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse { line, message: message.into() }
}

/// One labeled observation. Feature values are dense `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: u64,
    pub origin_id: u64,
    pub group_id: u64,
    pub source_id: u64,
    pub features: Vec<f64>,
    /// Dense 0-based class index.
    pub label: usize,
}

impl Sample {
    /// A fresh sample that is its own origin.
    pub fn new(sample_id: u64, group_id: u64, source_id: u64, features: Vec<f64>, label: usize) -> Self {
        Sample { sample_id, origin_id: sample_id, group_id, source_id, features, label }
    }
}

/// Derive a new sample from `parent`: same label, group, source, and — the
/// important part — the parent's origin, so chains of derivation all point at
/// the root observation. Errors if the feature dimensionality changes.
pub fn derive_sample(parent: &Sample, new_features: Vec<f64>, new_id: u64) -> Result<Sample, DataError> {
    if new_features.len() != parent.features.len() {
        return Err(DataError::Invalid(format!(
            "derived sample has {} features, parent has {}",
            new_features.len(),
            parent.features.len()
        )));
    }
    Ok(Sample {
        sample_id: new_id,
        origin_id: parent.origin_id,
        group_id: parent.group_id,
        source_id: parent.source_id,
        features: new_features,
        label: parent.label,
    })
}

/// A collection of samples with a fixed feature schema and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
    pub n_classes: usize,
    /// Class-name mapping when labels were ingested as strings, in
    /// first-appearance order; empty for numeric labels.
    pub label_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset and check its invariants: unique sample ids, labels in
    /// range, uniform feature dimensionality, and at least one sample per
    /// declared class.
    pub fn new(samples: Vec<Sample>, feature_names: Vec<String>, n_classes: usize) -> Result<Self, DataError> {
        let ds = Self::new_degenerate(samples, feature_names, n_classes)?;
        let counts = ds.class_counts();
        for class in 0..ds.n_classes {
            if !counts.contains_key(&class) {
                return Err(DataError::Invalid(format!("class {class} has no samples")));
            }
        }
        Ok(ds)
    }

    /// Like [`Dataset::new`] but allows empty classes (and an empty dataset).
    /// Callers that accept degenerate data opt in explicitly.
    pub fn new_degenerate(
        samples: Vec<Sample>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.sample_id) {
                return Err(DataError::Invalid(format!("duplicate sample_id {}", s.sample_id)));
            }
            if s.label >= n_classes {
                return Err(DataError::Invalid(format!(
                    "label {} out of range for {} classes",
                    s.label, n_classes
                )));
            }
            if s.features.len() != feature_names.len() {
                return Err(DataError::Invalid(format!(
                    "sample {} has {} features, schema has {}",
                    s.sample_id,
                    s.features.len(),
                    feature_names.len()
                )));
            }
        }
        Ok(Dataset { samples, feature_names, n_classes, label_names: Vec::new() })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Count of samples per class, over classes actually present.
    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        class_counts(&self.samples)
    }
}

/// Count of samples per class present in a view. An empty view yields an
/// empty map.
pub fn class_counts(view: &[Sample]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for s in view {
        *counts.entry(s.label).or_insert(0) += 1;
    }
    counts
}

/// Column layout of a dataset file. `group_id` and `source_id` are optional;
/// a missing group column defaults each sample's group to its own id, and a
/// missing source column defaults to source 0.
#[derive(Debug, Clone, Copy)]
struct Header {
    has_group: bool,
    has_source: bool,
    n_features: usize,
}

fn parse_header(line: &str) -> Result<Header, DataError> {
    let cols: Vec<&str> = line.split(',').collect();
    let mut idx = 0;
    if cols.get(idx) != Some(&"sample_id") {
        return Err(parse_err(1, "malformed header: expected leading sample_id column"));
    }
    idx += 1;
    let has_group = cols.get(idx) == Some(&"group_id");
    if has_group {
        idx += 1;
    }
    let has_source = cols.get(idx) == Some(&"source_id");
    if has_source {
        idx += 1;
    }
    if cols.get(idx) != Some(&"label") {
        return Err(parse_err(1, "malformed header: expected label column"));
    }
    idx += 1;
    let n_features = cols.len() - idx;
    for (f, col) in cols[idx..].iter().enumerate() {
        let expected = format!("f_{f}");
        if *col != expected {
            return Err(parse_err(1, format!("malformed header: expected {expected}, found {col}")));
        }
    }
    Ok(Header { has_group, has_source, n_features })
}

struct RawRow {
    line: usize,
    sample_id: u64,
    group_id: Option<u64>,
    source_id: u64,
    label_cell: String,
    features: Vec<f64>,
}

fn parse_u64_cell(cell: &str, line: usize, what: &str) -> Result<u64, DataError> {
    cell.parse::<u64>()
        .map_err(|_| parse_err(line, format!("invalid {what} '{cell}'")))
}

/// Load a dataset from its canonical comma-separated form.
///
/// Labels may be non-negative integers (kept as-is, required to be dense) or
/// arbitrary unquoted strings; if any label cell fails to parse as an
/// integer, every label in the file is treated as a string class name and
/// mapped to a dense index in first-appearance order. The mapping is kept on
/// the returned dataset and emitted alongside by [`write_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    load_dataset_str(&text)
}

/// [`load_dataset`] over in-memory text; line numbers in errors are 1-based.
pub fn load_dataset_str(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, first)) => parse_header(first)?,
        None => return Err(parse_err(1, "malformed header: empty file")),
    };

    let mut rows: Vec<RawRow> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let expected = 2 + header.has_group as usize + header.has_source as usize + header.n_features;
        if cells.len() != expected {
            return Err(parse_err(lineno, "arity mismatch"));
        }
        let mut idx = 0;
        let sample_id = parse_u64_cell(cells[idx], lineno, "sample_id")?;
        idx += 1;
        let group_id = if header.has_group {
            let g = parse_u64_cell(cells[idx], lineno, "group_id")?;
            idx += 1;
            Some(g)
        } else {
            None
        };
        let source_id = if header.has_source {
            let s = parse_u64_cell(cells[idx], lineno, "source_id")?;
            idx += 1;
            s
        } else {
            0
        };
        let label_cell = cells[idx].to_string();
        idx += 1;
        let mut features = Vec::with_capacity(header.n_features);
        for cell in &cells[idx..] {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric feature cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite feature cell '{cell}'")));
            }
            features.push(v);
        }
        rows.push(RawRow { line: lineno, sample_id, group_id, source_id, label_cell, features });
    }

    // Decide label mode: numeric only if every label cell parses as u64.
    let numeric = rows.iter().all(|r| r.label_cell.parse::<u64>().is_ok());
    let mut label_names: Vec<String> = Vec::new();
    let mut name_to_index: HashMap<String, usize> = HashMap::new();
    let mut labeled: Vec<(usize, usize)> = Vec::with_capacity(rows.len()); // (line, label)
    if numeric {
        for r in &rows {
            labeled.push((r.line, r.label_cell.parse::<u64>().unwrap() as usize));
        }
        let distinct: HashSet<usize> = labeled.iter().map(|&(_, l)| l).collect();
        let n_classes = distinct.len();
        for &(line, l) in &labeled {
            if l >= n_classes {
                return Err(parse_err(
                    line,
                    format!("label {l} out of range: labels must be dense, file declares {n_classes} classes"),
                ));
            }
        }
    } else {
        for r in &rows {
            let next = label_names.len();
            let idx = *name_to_index.entry(r.label_cell.clone()).or_insert_with(|| {
                label_names.push(r.label_cell.clone());
                next
            });
            labeled.push((r.line, idx));
        }
    }

    let mut seen = HashSet::with_capacity(rows.len());
    let mut samples = Vec::with_capacity(rows.len());
    for (r, &(line, label)) in rows.iter().zip(&labeled) {
        if !seen.insert(r.sample_id) {
            return Err(parse_err(line, format!("duplicate sample_id {}", r.sample_id)));
        }
        samples.push(Sample {
            sample_id: r.sample_id,
            origin_id: r.sample_id,
            group_id: r.group_id.unwrap_or(r.sample_id),
            source_id: r.source_id,
            features: r.features.clone(),
            label,
        });
    }
    let n_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut ds = Dataset::new_degenerate(
        samples,
        (0..rows.first().map(|r| r.features.len()).unwrap_or(0))
            .map(|f| format!("f_{f}"))
            .collect(),
        n_classes,
    )?;
    ds.label_names = label_names;
    Ok(ds)
}

/// Render a dataset in canonical form: full header, rows in ascending
/// `sample_id` order, LF line endings, shortest round-trip float formatting.
pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str("sample_id,group_id,source_id,label");
    for f in 0..ds.n_features() {
        let _ = write!(out, ",f_{f}");
    }
    out.push('\n');
    let mut rows: Vec<&Sample> = ds.samples.iter().collect();
    rows.sort_by_key(|s| s.sample_id);
    for s in rows {
        let _ = write!(out, "{},{},{},{}", s.sample_id, s.group_id, s.source_id, s.label);
        for v in &s.features {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Write the canonical form to `path`. When the dataset carries a string
/// label mapping, the class names are written alongside to `<path>.labels`,
/// one name per line in index order.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, dataset_to_string(ds))?;
    if !ds.label_names.is_empty() {
        let mut names = ds.label_names.join("\n");
        names.push('\n');
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".labels");
        std::fs::write(Path::new(&sidecar), names)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: u64, label: usize, features: Vec<f64>) -> Sample {
        Sample::new(id, id, 0, features, label)
    }

    #[test]
    fn derive_copies_lineage_and_label() {
        let mut parent = sample(3, 1, vec![1.0, 2.0]);
        parent.group_id = 9;
        parent.source_id = 4;
        let child = derive_sample(&parent, vec![1.5, 2.5], 100).unwrap();
        assert_eq!(child.sample_id, 100);
        assert_eq!(child.origin_id, 3);
        assert_eq!(child.group_id, 9);
        assert_eq!(child.source_id, 4);
        assert_eq!(child.label, 1);
    }

    #[test]
    fn derive_chain_keeps_root_origin() {
        let root = sample(1, 0, vec![0.0]);
        let first = derive_sample(&root, vec![0.1], 2).unwrap();
        let second = derive_sample(&first, vec![0.2], 3).unwrap();
        assert_eq!(second.origin_id, 1);
    }

    #[test]
    fn derive_rejects_dimension_change() {
        let parent = sample(1, 0, vec![1.0, 2.0]);
        assert!(derive_sample(&parent, vec![1.0], 2).is_err());
    }

    #[test]
    fn class_counts_imbalanced() {
        let mut samples = Vec::new();
        for id in 0..129 {
            samples.push(sample(id, 0, vec![0.0]));
        }
        for id in 129..137 {
            samples.push(sample(id, 1, vec![0.0]));
        }
        let ds = Dataset::new(samples, vec!["f_0".into()], 2).unwrap();
        let counts = ds.class_counts();
        assert_eq!(counts.get(&0), Some(&129));
        assert_eq!(counts.get(&1), Some(&8));
    }

    #[test]
    fn class_counts_balanced_and_empty() {
        let samples: Vec<Sample> = (0..20).map(|id| sample(id, (id % 2) as usize, vec![0.0])).collect();
        let ds = Dataset::new(samples, vec!["f_0".into()], 2).unwrap();
        assert_eq!(ds.class_counts(), BTreeMap::from([(0, 10), (1, 10)]));

        let empty = Dataset::new_degenerate(vec![], vec![], 0).unwrap();
        assert!(empty.class_counts().is_empty());
    }

    #[test]
    fn new_rejects_duplicate_id_and_out_of_range_label() {
        let dup = vec![sample(1, 0, vec![0.0]), sample(1, 0, vec![0.0])];
        let err = Dataset::new(dup, vec!["f_0".into()], 1).unwrap_err();
        assert!(err.to_string().contains("duplicate sample_id 1"));

        let high = vec![sample(1, 2, vec![0.0])];
        assert!(Dataset::new(high, vec!["f_0".into()], 2).is_err());
    }

    #[test]
    fn new_rejects_empty_class_unless_degenerate() {
        let samples = vec![sample(1, 0, vec![0.0])];
        assert!(Dataset::new(samples.clone(), vec!["f_0".into()], 2).is_err());
        assert!(Dataset::new_degenerate(samples, vec!["f_0".into()], 2).is_ok());
    }

    #[test]
    fn load_reports_arity_mismatch_with_line_number() {
        let text = "sample_id,group_id,source_id,label,f_0,f_1\n\
                    0,0,0,0,1.0,2.0\n\
                    1,1,0,1,1.0,2.0\n\
                    2,2,0,0,1.0\n";
        let err = load_dataset_str(text).unwrap_err();
        assert_eq!(err.to_string(), "line 4: arity mismatch");
    }

    #[test]
    fn load_reports_duplicate_sample_id() {
        let text = "sample_id,group_id,source_id,label,f_0\n\
                    7,7,0,0,1.0\n\
                    7,7,0,1,2.0\n";
        let err = load_dataset_str(text).unwrap_err();
        assert_eq!(err.to_string(), "line 3: duplicate sample_id 7");
    }

    #[test]
    fn load_reports_non_numeric_feature() {
        let text = "sample_id,group_id,source_id,label,f_0\n0,0,0,0,abc\n";
        let err = load_dataset_str(text).unwrap_err();
        assert_eq!(err.to_string(), "line 2: non-numeric feature cell 'abc'");
    }

    #[test]
    fn load_rejects_sparse_labels() {
        let text = "sample_id,group_id,source_id,label,f_0\n0,0,0,0,1.0\n1,1,0,3,1.0\n";
        let err = load_dataset_str(text).unwrap_err();
        assert!(err.to_string().starts_with("line 3: label 3 out of range"));
    }

    #[test]
    fn load_maps_string_labels_in_first_appearance_order() {
        let text = "sample_id,label,f_0\n0,tumor,1.0\n1,normal,2.0\n2,tumor,3.0\n";
        let ds = load_dataset_str(text).unwrap();
        assert_eq!(ds.label_names, vec!["tumor".to_string(), "normal".to_string()]);
        assert_eq!(ds.samples[0].label, 0);
        assert_eq!(ds.samples[1].label, 1);
        assert_eq!(ds.samples[2].label, 0);
        // Group column absent: groups default to sample ids.
        assert_eq!(ds.samples[2].group_id, 2);
        assert_eq!(ds.samples[2].source_id, 0);
    }

    #[test]
    fn round_trip_is_identical() {
        let text = "sample_id,group_id,source_id,label,f_0,f_1\n\
                    0,10,1,0,0.1,-3.25\n\
                    1,10,1,1,1e-7,2.5\n\
                    2,11,2,0,-0,1000000\n";
        let ds = load_dataset_str(text).unwrap();
        let written = dataset_to_string(&ds);
        let reloaded = load_dataset_str(&written).unwrap();
        assert_eq!(ds, reloaded);
        // A second write is byte-identical.
        assert_eq!(written, dataset_to_string(&reloaded));
    }

    #[test]
    fn write_orders_rows_by_sample_id() {
        let samples = vec![sample(5, 1, vec![1.0]), sample(2, 0, vec![2.0])];
        let ds = Dataset::new(samples, vec!["f_0".into()], 2).unwrap();
        let text = dataset_to_string(&ds);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("2,"));
        assert!(lines[2].starts_with("5,"));
    }
}
