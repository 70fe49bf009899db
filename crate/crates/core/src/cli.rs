//! Run configuration and the command implementations behind the binary.
//!
//! Config files are TOML. Every key is optional; flags override the file.
//!
//! ```toml
//! manifest = "data/manifest.txt"   # relative paths resolve against this file
//! cache = "out/embeddings.emb"     # default: <out>/embeddings.emb
//! out = "out"
//! seed = 42                        # split seed and base training seed
//! splits = ["80-10", "60-30", "50-40", "40-50", "20-70"]
//! heads = ["softmax", "svm", "knn"]
//! validation = 0.10
//!
//! [provider]
//! kind = "builtin"                 # or "precomputed" with `source = "file.emb"`
//! dim = 2048
//! seed = 0
//!
//! [training]                       # any TrainingConfig field except seed
//! steps = 4000
//! learning_rate = 0.035
//! ```
//!
//! Exit codes: 0 success, 2 input validation, 3 extraction, 4 train/eval.
//! Every command ends its output with one `RESULT:` line.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{class_distribution, load_manifest, stratified_split, DatasetManifest, SplitConfig, DEFAULT_VALIDATION_FRACTION};
use crate::embedding::{get_or_compute, EmbeddingSet, ProviderConfig, DEFAULT_DIM};
use crate::eval::report::{parse_sweep_json, to_json};
use crate::eval::{cell_seed, emit_report, evaluate, run_sweep_with_progress, ReportFormat, ReportRef};
use crate::heads::{train_head, HeadKind, LabeledEmbeddings, TrainedHead, TrainingConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EXTRACT: i32 = 3;
pub const EXIT_TRAIN: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(e: impl fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    pub fn extract(e: impl fmt::Display) -> Self {
        Self {
            code: EXIT_EXTRACT,
            message: e.to_string(),
        }
    }

    pub fn train(e: impl fmt::Display) -> Self {
        Self {
            code: EXIT_TRAIN,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn out_err(e: std::io::Error) -> CliError {
    CliError::input(format!("writing output: {e}"))
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub splits: Option<String>,
    pub heads: Option<String>,
    pub dim: Option<usize>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    manifest: Option<PathBuf>,
    cache: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    splits: Option<Vec<String>>,
    heads: Option<Vec<String>>,
    validation: Option<f64>,
    provider: Option<ProviderFile>,
    training: Option<TrainingConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProviderFile {
    kind: String,
    dim: Option<usize>,
    seed: Option<u64>,
    source: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest_path: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub training: TrainingConfig,
    pub splits: Vec<SplitConfig>,
    pub heads: Vec<HeadKind>,
    pub output_dir: PathBuf,
    pub cache_path: PathBuf,
}

fn split_list(items: &[String], seed: u64, validation: f64) -> Result<Vec<SplitConfig>, CliError> {
    items
        .iter()
        .map(|s| {
            let mut c = SplitConfig::from_label(s, seed).map_err(CliError::input)?;
            c.validation_fraction = validation;
            c.validate().map_err(CliError::input)?;
            Ok(c)
        })
        .collect()
}

fn comma_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self, CliError> {
        let (file, base) = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
                let parsed: ConfigFile =
                    toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
                (parsed, path.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let rel = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };

        let seed = o.seed.or(file.seed).unwrap_or(0);
        let validation = file.validation.unwrap_or(DEFAULT_VALIDATION_FRACTION);
        let split_names = match (&o.splits, &file.splits) {
            (Some(s), _) => comma_list(s),
            (None, Some(list)) => list.clone(),
            (None, None) => ["80-10", "60-30", "50-40", "40-50", "20-70"].map(String::from).to_vec(),
        };
        let splits = split_list(&split_names, seed, validation)?;
        let head_names = match (&o.heads, &file.heads) {
            (Some(s), _) => comma_list(s),
            (None, Some(list)) => list.clone(),
            (None, None) => HeadKind::ALL.iter().map(|h| h.to_string()).collect(),
        };
        let heads = head_names
            .iter()
            .map(|h| h.parse::<HeadKind>().map_err(CliError::input))
            .collect::<Result<Vec<_>, _>>()?;
        if splits.is_empty() || heads.is_empty() {
            return Err(CliError::input("split and head lists must be non-empty"));
        }

        let provider = match file.provider {
            None => ProviderConfig::builtin(o.dim.unwrap_or(DEFAULT_DIM), 0),
            Some(p) => match p.kind.as_str() {
                "builtin" => {
                    if p.source.is_some() {
                        return Err(CliError::input("builtin provider takes no `source`"));
                    }
                    ProviderConfig::builtin(o.dim.or(p.dim).unwrap_or(DEFAULT_DIM), p.seed.unwrap_or(0))
                }
                "precomputed" => {
                    if p.seed.is_some() {
                        return Err(CliError::input("precomputed provider takes no `seed`"));
                    }
                    let source = p
                        .source
                        .ok_or_else(|| CliError::input("precomputed provider needs `source`"))?;
                    ProviderConfig::Precomputed {
                        source_path: rel(source),
                        dim: o.dim.or(p.dim),
                    }
                }
                other => return Err(CliError::input(format!("unknown provider kind `{other}`"))),
            },
        };
        provider.validate().map_err(CliError::input)?;

        let mut training = file.training.unwrap_or_default();
        training.seed = seed;
        training.validate().map_err(CliError::input)?;

        let output_dir = o.out.clone().or(file.out.map(&rel)).unwrap_or_else(|| PathBuf::from("out"));
        let cache_path = o
            .cache
            .clone()
            .or(file.cache.map(&rel))
            .unwrap_or_else(|| output_dir.join("embeddings.emb"));
        Ok(Self {
            manifest_path: o.manifest.clone().or(file.manifest.map(&rel)),
            provider,
            training,
            splits,
            heads,
            output_dir,
            cache_path,
        })
    }

    fn manifest(&self) -> Result<DatasetManifest, CliError> {
        let path = self
            .manifest_path
            .as_ref()
            .ok_or_else(|| CliError::input("no manifest given (use --manifest or `manifest` in the config)"))?;
        load_manifest(path).map_err(CliError::input)
    }

    fn embeddings(&self, manifest: &DatasetManifest) -> Result<(EmbeddingSet, usize, usize), CliError> {
        let (set, stats) = get_or_compute(manifest, &self.provider, &self.cache_path).map_err(CliError::extract)?;
        Ok((set, stats.cached, stats.computed))
    }

    /// Picks a split by label (default: the first configured) and returns it
    /// with its grid index. A label not in the list gets index 0.
    fn pick_split(&self, label: Option<&str>) -> Result<(usize, SplitConfig), CliError> {
        match label {
            None => Ok((0, self.splits[0])),
            Some(l) => {
                let mut wanted = SplitConfig::from_label(l, self.training.seed).map_err(CliError::input)?;
                wanted.validation_fraction = self.splits[0].validation_fraction;
                Ok(self
                    .splits
                    .iter()
                    .position(|s| s.label() == wanted.label())
                    .map(|i| (i, self.splits[i]))
                    .unwrap_or((0, wanted)))
            }
        }
    }

    fn pick_head(&self, head: Option<HeadKind>) -> (usize, HeadKind) {
        match head {
            None => (0, self.heads[0]),
            Some(h) => (self.heads.iter().position(|&x| x == h).unwrap_or(0), h),
        }
    }
}

pub fn cmd_ingest(manifest_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = load_manifest(manifest_path).map_err(CliError::input)?;
    let counts = class_distribution(&manifest);
    let total: usize = counts.values().sum();
    writeln!(out, "dataset {} ({} classes, {} samples)", manifest.name, manifest.num_classes(), total).map_err(out_err)?;
    for label in &manifest.labels {
        let n = counts[&label.id];
        writeln!(out, "  {:<3} {:<12} {:>6}  {:5.1}%", label.id, label.name, n, 100.0 * n as f64 / total as f64)
            .map_err(out_err)?;
    }
    let (min, max) = (counts.values().min().unwrap(), counts.values().max().unwrap());
    writeln!(out, "checks: unique ids ok, labels ok, every class non-empty ok; largest/smallest class {:.2}", *max as f64 / *min as f64)
        .map_err(out_err)?;
    let summary: Vec<String> = manifest.labels.iter().map(|l| format!("{}={}", l.name, counts[&l.id])).collect();
    writeln!(out, "RESULT: ingest ok classes={} samples={} {}", manifest.num_classes(), total, summary.join(" "))
        .map_err(out_err)?;
    Ok(())
}

pub fn cmd_extract(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = config.manifest()?;
    let (set, cached, computed) = config.embeddings(&manifest)?;
    writeln!(out, "provider {}", set.provider_tag).map_err(out_err)?;
    writeln!(
        out,
        "RESULT: extract {} entries dim={} ({cached} cached, {computed} computed) cache={}",
        set.len(),
        set.dim,
        config.cache_path.display()
    )
    .map_err(out_err)?;
    Ok(())
}

struct Prepared {
    manifest: DatasetManifest,
    embeddings: EmbeddingSet,
    split_index: usize,
    split: SplitConfig,
}

fn prepare(config: &RunConfig, split: Option<&str>) -> Result<Prepared, CliError> {
    let (split_index, split) = config.pick_split(split)?;
    let manifest = config.manifest()?;
    let (embeddings, _, _) = config.embeddings(&manifest)?;
    Ok(Prepared {
        manifest,
        embeddings,
        split_index,
        split,
    })
}

/// Trains one head on one split with the same seed the sweep would use for
/// that cell, and writes the model in `HED1` format.
pub fn cmd_train(
    config: &RunConfig,
    head: Option<HeadKind>,
    split: Option<&str>,
    model_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<PathBuf, CliError> {
    let p = prepare(config, split)?;
    let (head_index, head) = config.pick_head(head);
    let parts = stratified_split(&p.manifest, &p.split).map_err(CliError::train)?;
    let gather = |ids: &[String]| LabeledEmbeddings::from_ids(&p.embeddings, &p.manifest, ids).map_err(CliError::train);
    let (train, validation) = (gather(&parts.train_ids)?, gather(&parts.validation_ids)?);
    let training = config
        .training
        .clone()
        .with_seed(cell_seed(config.training.seed, p.split_index, head_index));
    let (model, trace) = train_head(head, &train, &validation, &training).map_err(CliError::train)?;
    for c in &trace.checkpoints {
        let val = c.validation_accuracy.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        writeln!(out, "step {:>6}  objective {:.6}  validation {}", c.step, c.train_objective, val).map_err(out_err)?;
    }
    let path = model_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir.join(format!("{head}-{}.hed", p.split.label())));
    model.save(&path).map_err(CliError::train)?;
    writeln!(
        out,
        "RESULT: train head={head} split={} train={} seed={} model={}",
        p.split.label(),
        train.len(),
        training.seed,
        path.display()
    )
    .map_err(out_err)?;
    Ok(path)
}

/// Evaluates a saved model on the test partition of `split`.
pub fn cmd_eval(config: &RunConfig, model_path: &Path, split: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let p = prepare(config, split)?;
    let model = TrainedHead::load(model_path).map_err(CliError::train)?;
    let parts = stratified_split(&p.manifest, &p.split).map_err(CliError::train)?;
    let test = LabeledEmbeddings::from_ids(&p.embeddings, &p.manifest, &parts.test_ids).map_err(CliError::train)?;
    let report = evaluate(&model, &test, config.training.test_batch_size)
        .map_err(CliError::train)?
        .with_context(p.split, config.training.seed);
    let labels = p.manifest.label_names();
    for (name, (acc, row)) in labels.iter().zip(report.per_class_accuracy_display.iter().zip(&report.confusion.counts)) {
        writeln!(out, "  {name:<12} {acc}  {row:?}").map_err(out_err)?;
    }
    let mut written = Vec::new();
    for format in ReportFormat::ALL {
        written.push(emit_report(&report, format, &config.output_dir).map_err(CliError::train)?);
    }
    writeln!(
        out,
        "RESULT: eval head={} split={} samples={} accuracy={} baseline={:.4} report={}",
        report.head,
        p.split.label(),
        report.sample_count,
        report.overall_accuracy,
        report.baseline,
        written[0].display()
    )
    .map_err(out_err)?;
    Ok(())
}

pub fn cmd_sweep(config: &RunConfig, out: &mut dyn Write, progress: &mut (dyn Write + Send)) -> Result<Vec<PathBuf>, CliError> {
    let manifest = config.manifest()?;
    let (embeddings, _, _) = config.embeddings(&manifest)?;
    let lock = std::sync::Mutex::new(progress);
    let report = run_sweep_with_progress(&manifest, &embeddings, &config.splits, &config.heads, &config.training, &|ev| {
        if let Ok(mut w) = lock.lock() {
            let _ = writeln!(w, "[{}/{}] {} {} accuracy {:.4}", ev.completed, ev.total, ev.split_label, ev.head, ev.overall_accuracy);
        }
    })
    .map_err(CliError::train)?;
    let mut written = Vec::new();
    for format in ReportFormat::ALL {
        written.push(emit_report(&report, format, &config.output_dir).map_err(CliError::train)?);
    }
    write!(out, "{}", report.render_grid()).map_err(out_err)?;
    writeln!(
        out,
        "RESULT: sweep cells={} min_accuracy={} baseline={:.4} json={}",
        report.cells.len(),
        report.min_accuracy(),
        1.0 / manifest.num_classes() as f64,
        written[0].display()
    )
    .map_err(out_err)?;
    Ok(written)
}

/// Re-emits a saved sweep JSON in the requested formats.
pub fn cmd_report(input: &Path, formats: &[ReportFormat], out_dir: &Path, out: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::input(format!("cannot read {}: {e}", input.display())))?;
    let report = parse_sweep_json(&text).map_err(CliError::input)?;
    let mut written = Vec::new();
    for &format in formats {
        let path = if format == ReportFormat::Json && out_dir.join("sweep.json") == input {
            // Re-serialising onto the input would be a no-op; check it instead.
            let again = to_json(ReportRef::Sweep(&report)).map_err(CliError::train)?;
            if again != text {
                return Err(CliError::input("input JSON is not in canonical form"));
            }
            input.to_path_buf()
        } else {
            emit_report(&report, format, out_dir).map_err(CliError::train)?
        };
        written.push(path);
    }
    write!(out, "{}", report.render_grid()).map_err(out_err)?;
    let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    writeln!(out, "RESULT: report cells={} files={}", report.cells.len(), names.join(",")).map_err(out_err)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_the_five_splits_and_three_heads() {
        let c = RunConfig::load(&Overrides::default()).unwrap();
        let labels: Vec<String> = c.splits.iter().map(SplitConfig::label).collect();
        assert_eq!(labels, vec!["80-10", "60-30", "50-40", "40-50", "20-70"]);
        assert_eq!(c.heads, HeadKind::ALL.to_vec());
        assert_eq!(c.provider, ProviderConfig::builtin(2048, 0));
        assert_eq!(c.cache_path, PathBuf::from("out/embeddings.emb"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(
            &cfg,
            "manifest = \"m.txt\"\nseed = 5\nsplits = [\"60-30\"]\n[provider]\nkind = \"builtin\"\ndim = 64\nseed = 3\n[training]\nsteps = 10\n",
        )
        .unwrap();
        let o = Overrides {
            config: Some(cfg),
            seed: Some(9),
            heads: Some("knn".into()),
            dim: Some(16),
            ..Overrides::default()
        };
        let c = RunConfig::load(&o).unwrap();
        assert_eq!(c.manifest_path, Some(dir.path().join("m.txt")));
        assert_eq!(c.training.seed, 9);
        assert_eq!(c.training.steps, 10);
        assert_eq!(c.splits[0].seed, 9);
        assert_eq!(c.heads, vec![HeadKind::Knn]);
        assert_eq!(c.provider, ProviderConfig::builtin(16, 3));
    }

    #[test]
    fn bad_inputs_exit_with_validation_code() {
        for o in [
            Overrides {
                splits: Some("80-x".into()),
                ..Overrides::default()
            },
            Overrides {
                heads: Some("forest".into()),
                ..Overrides::default()
            },
            Overrides {
                config: Some(PathBuf::from("/nonexistent/run.toml")),
                ..Overrides::default()
            },
        ] {
            assert_eq!(RunConfig::load(&o).unwrap_err().code, EXIT_INPUT);
        }
    }
}
