//! Labeled-sample manifests and deterministic stratified splits.
//!
//! Manifest text format:
//!
//! ```text
//! # comments and blank lines are ignored
//! name=original;labels=cbsd,cmd,bls,gmd,rmd,healthy
//! img_0001<TAB>images/cbsd/0001.png<TAB>cbsd
//! img_0002<TAB>images/cmd/0002.png<TAB>cmd
//! ```
//!
//! The first meaningful line is the header. Each record is
//! `<sample_id>\t<source>\t<label_name>`; `source` is an image path (resolved
//! relative to the manifest's directory) or an embedding key.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// Validation fraction used when a split does not set one.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.10;

/// Added before flooring in round-half-up so that products such as
/// `0.7 * 5 = 3.4999999999999996` still round the way the decimals do.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest has no header line")]
    MissingHeader,
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate sample id `{id}`")]
    DuplicateSample { line: usize, id: String },
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("invalid split configuration: {0}")]
    InvalidSplit(String),
    #[error("class `{class}` has {count} samples, too few to fill validation/train/test (would get {validation}/{train}/{test})")]
    ClassTooSmall {
        class: String,
        count: usize,
        validation: usize,
        train: usize,
        test: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub sample_id: String,
    pub source: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub labels: Vec<ClassLabel>,
    pub samples: Vec<Sample>,
    /// Directory relative image sources are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    /// Builds a manifest from label names and `(id, source, label id)` triples,
    /// checking every invariant `load_manifest` checks.
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        label_names: impl IntoIterator<Item = S>,
        samples: Vec<Sample>,
    ) -> Result<Self, DatasetError> {
        let labels = label_names
            .into_iter()
            .enumerate()
            .map(|(id, n)| ClassLabel { id, name: n.into() })
            .collect::<Vec<_>>();
        check_labels(&labels, 0)?;
        let mut seen = HashSet::new();
        for (i, s) in samples.iter().enumerate() {
            if s.label >= labels.len() {
                return Err(DatasetError::MalformedRecord {
                    line: i + 1,
                    reason: format!("label id {} out of range", s.label),
                });
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(DatasetError::DuplicateSample {
                    line: i + 1,
                    id: s.sample_id.clone(),
                });
            }
        }
        let manifest = Self {
            name: name.into(),
            labels,
            samples,
            base_dir: None,
        };
        manifest.check_nonempty_classes()?;
        Ok(manifest)
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }

    pub fn label_id(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Map from sample id to its position in `samples`.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.sample_id.as_str(), i))
            .collect()
    }

    pub fn resolve_source(&self, sample: &Sample) -> PathBuf {
        let p = Path::new(&sample.source);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Renders the manifest in its text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("name={};labels={}\n", self.name, self.label_names().join(","));
        for s in &self.samples {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                s.sample_id, s.source, self.labels[s.label].name
            ));
        }
        out
    }

    fn check_nonempty_classes(&self) -> Result<(), DatasetError> {
        let counts = class_distribution(self);
        for label in &self.labels {
            if counts[&label.id] == 0 {
                return Err(DatasetError::EmptyClass(label.name.clone()));
            }
        }
        Ok(())
    }
}

fn check_labels(labels: &[ClassLabel], line: usize) -> Result<(), DatasetError> {
    if labels.is_empty() {
        return Err(DatasetError::MalformedHeader {
            line,
            reason: "no labels declared".into(),
        });
    }
    let mut seen = HashSet::new();
    for l in labels {
        if l.name.is_empty() {
            return Err(DatasetError::MalformedHeader {
                line,
                reason: "empty label name".into(),
            });
        }
        if !seen.insert(l.name.as_str()) {
            return Err(DatasetError::MalformedHeader {
                line,
                reason: format!("label `{}` declared twice", l.name),
            });
        }
    }
    Ok(())
}

fn parse_header(line_no: usize, line: &str) -> Result<(String, Vec<ClassLabel>), DatasetError> {
    let bad = |reason: &str| DatasetError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let (name_part, labels_part) = line
        .split_once(';')
        .ok_or_else(|| bad("expected `name=<name>;labels=<a,b,...>`"))?;
    let name = name_part
        .trim()
        .strip_prefix("name=")
        .ok_or_else(|| bad("missing `name=`"))?;
    let labels = labels_part
        .trim()
        .strip_prefix("labels=")
        .ok_or_else(|| bad("missing `labels=`"))?;
    let labels: Vec<ClassLabel> = labels
        .split(',')
        .enumerate()
        .map(|(id, n)| ClassLabel {
            id,
            name: n.trim().to_string(),
        })
        .collect();
    check_labels(&labels, line_no)?;
    Ok((name.to_string(), labels))
}

/// Parses manifest text. Line numbers in errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, DatasetError> {
    let mut header: Option<(String, Vec<ClassLabel>)> = None;
    let mut samples = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((_, labels)) = &header else {
            header = Some(parse_header(line_no, line.trim())?);
            continue;
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(DatasetError::MalformedRecord {
                line: line_no,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (id, source, label_name) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if id.is_empty() {
            return Err(DatasetError::MalformedRecord {
                line: line_no,
                reason: "empty sample id".into(),
            });
        }
        let label = labels
            .iter()
            .position(|l| l.name == label_name)
            .ok_or_else(|| DatasetError::UnknownLabel {
                line: line_no,
                label: label_name.to_string(),
            })?;
        if !seen.insert(id.to_string()) {
            return Err(DatasetError::DuplicateSample {
                line: line_no,
                id: id.to_string(),
            });
        }
        samples.push(Sample {
            sample_id: id.to_string(),
            source: source.to_string(),
            label,
        });
    }

    let (name, labels) = header.ok_or(DatasetError::MissingHeader)?;
    let manifest = DatasetManifest {
        name,
        labels,
        samples,
        base_dir: None,
    };
    manifest.check_nonempty_classes()?;
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest = parse_manifest(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

/// Per-class sample counts, with every declared class present as a key.
pub fn class_distribution(manifest: &DatasetManifest) -> BTreeMap<usize, usize> {
    let mut counts: BTreeMap<usize, usize> = manifest.labels.iter().map(|l| (l.id, 0)).collect();
    for s in &manifest.samples {
        *counts.entry(s.label).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(rename = "train")]
    pub train_fraction: f64,
    #[serde(rename = "test")]
    pub test_fraction: f64,
    #[serde(rename = "validation")]
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(train_fraction: f64, test_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            test_fraction,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            seed,
        }
    }

    /// Parses a `"train-test"` percentage label such as `"80-10"`.
    pub fn from_label(label: &str, seed: u64) -> Result<Self, DatasetError> {
        let bad = || DatasetError::InvalidSplit(format!("`{label}` is not of the form TRAIN-TEST, e.g. 80-10"));
        let (train, test) = label.trim().split_once('-').ok_or_else(bad)?;
        let train: f64 = train.trim().parse().map_err(|_| bad())?;
        let test: f64 = test.trim().parse().map_err(|_| bad())?;
        let config = Self::new(train / 100.0, test / 100.0, seed);
        config.validate()?;
        Ok(config)
    }

    /// `"80-10"` style label built from the train and test percentages.
    pub fn label(&self) -> String {
        format!(
            "{}-{}",
            percent(self.train_fraction),
            percent(self.test_fraction)
        )
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fractions = [
            ("train", self.train_fraction),
            ("test", self.test_fraction),
            ("validation", self.validation_fraction),
        ];
        for (name, f) in fractions {
            if !(f > 0.0 && f < 1.0) {
                return Err(DatasetError::InvalidSplit(format!(
                    "{name} fraction {f} must lie in (0, 1)"
                )));
            }
        }
        let total = self.train_fraction + self.test_fraction + self.validation_fraction;
        if total > 1.0 + 1e-12 {
            return Err(DatasetError::InvalidSplit(format!(
                "fractions sum to {total}, more than 1"
            )));
        }
        Ok(())
    }
}

fn percent(f: f64) -> String {
    let p = f * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

impl fmt::Display for SplitConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The five train-test configurations: 80-10, 60-30, 50-40, 40-50, 20-70.
pub fn standard_splits(seed: u64) -> Vec<SplitConfig> {
    [(0.8, 0.1), (0.6, 0.3), (0.5, 0.4), (0.4, 0.5), (0.2, 0.7)]
        .into_iter()
        .map(|(train, test)| SplitConfig::new(train, test, seed))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub config: SplitConfig,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + ROUNDING_SLACK).floor() as usize
}

/// Partition sizes `(validation, train, test)` for a class of `count` samples.
pub fn partition_sizes(count: usize, config: &SplitConfig) -> (usize, usize, usize) {
    let n = count as f64;
    let validation = round_half_up(n * config.validation_fraction).min(count);
    let train = round_half_up(n * config.train_fraction).min(count - validation);
    let test = round_half_up(n * config.test_fraction).min(count - validation - train);
    (validation, train, test)
}

/// Stratified validation/train/test split.
///
/// Classes are processed in id order with one generator seeded by
/// `config.seed`. Each class's samples (in manifest order) are shuffled with
/// Fisher-Yates; the first `round(n * validation)` go to validation, the next
/// `round(n * train)` to train, the next `round(n * test)` to test, each
/// truncated to what remains.
pub fn stratified_split(
    manifest: &DatasetManifest,
    config: &SplitConfig,
) -> Result<SplitResult, DatasetError> {
    config.validate()?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); manifest.num_classes()];
    for (i, s) in manifest.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }

    let mut rng = SeededRng::new(config.seed);
    let mut result = SplitResult {
        train_ids: Vec::new(),
        validation_ids: Vec::new(),
        test_ids: Vec::new(),
        config: *config,
    };

    for (class, members) in by_class.iter_mut().enumerate() {
        let count = members.len();
        let (validation, train, test) = partition_sizes(count, config);
        if validation == 0 || train == 0 || test == 0 {
            return Err(DatasetError::ClassTooSmall {
                class: manifest.labels[class].name.clone(),
                count,
                validation,
                train,
                test,
            });
        }
        rng.shuffle(members);
        let id = |i: &usize| manifest.samples[*i].sample_id.clone();
        result.validation_ids.extend(members[..validation].iter().map(id));
        result
            .train_ids
            .extend(members[validation..validation + train].iter().map(id));
        result.test_ids.extend(
            members[validation + train..validation + train + test]
                .iter()
                .map(id),
        );
    }
    Ok(result)
}
