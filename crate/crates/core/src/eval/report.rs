//! Report files: lossless JSON, an accuracy CSV, and plot data.
//!
//! Sweep JSON schema:
//!
//! ```text
//! { "dataset", "provider_tag", "labels": [..],
//!   "cells": [ { "split": {"train","test","validation","seed"}, "head",
//!                "overall_accuracy", "per_class_accuracy": [..],
//!                "confusion_counts": [[..]], "confusion_normalized": [[..]],
//!                "empty_rows", "baseline", "sample_count", "training_seed",
//!                "overall_accuracy_display", "per_class_accuracy_display" } ] }
//! ```
//!
//! CSV columns are `split_label,head,seed,overall_accuracy` where `seed` is
//! the split seed. Plot data is JSON holding the accuracy grid and one
//! normalized matrix per cell, each value both at full precision and as a
//! two-decimal display string.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{display2, EvalError, EvaluationReport, SweepReport};
use crate::dataset::SplitConfig;
use crate::heads::HeadKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    PlotData,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::PlotData];
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "plot-data" | "plot" => Ok(Self::PlotData),
            other => Err(format!("unknown report format `{other}` (json, csv, plot-data)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ReportRef<'a> {
    Sweep(&'a SweepReport),
    Single(&'a EvaluationReport),
}

impl<'a> From<&'a SweepReport> for ReportRef<'a> {
    fn from(r: &'a SweepReport) -> Self {
        Self::Sweep(r)
    }
}

impl<'a> From<&'a EvaluationReport> for ReportRef<'a> {
    fn from(r: &'a EvaluationReport) -> Self {
        Self::Single(r)
    }
}

impl<'a> ReportRef<'a> {
    fn cells(&self) -> Vec<&'a EvaluationReport> {
        match *self {
            Self::Sweep(s) => s.cells.iter().collect(),
            Self::Single(r) => vec![r],
        }
    }

    fn stem(&self) -> &'static str {
        match self {
            Self::Sweep(_) => "sweep",
            Self::Single(_) => "report",
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Self::Sweep(s) => s.labels.clone(),
            Self::Single(r) => (0..r.confusion.num_classes()).map(|c| c.to_string()).collect(),
        }
    }
}

pub fn to_json(report: ReportRef<'_>) -> Result<String, EvalError> {
    let mut s = match report {
        ReportRef::Sweep(r) => serde_json::to_string_pretty(r)?,
        ReportRef::Single(r) => serde_json::to_string_pretty(r)?,
    };
    s.push('\n');
    Ok(s)
}

pub fn parse_sweep_json(text: &str) -> Result<SweepReport, EvalError> {
    Ok(serde_json::from_str(text)?)
}

fn split_label(split: &Option<SplitConfig>) -> String {
    split.as_ref().map(SplitConfig::label).unwrap_or_default()
}

pub fn to_csv(report: ReportRef<'_>) -> String {
    let mut out = String::from("split_label,head,seed,overall_accuracy\n");
    for c in report.cells() {
        let seed = c.split.map(|s| s.seed.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", split_label(&c.split), c.head, seed, c.overall_accuracy));
    }
    out
}

#[derive(Serialize)]
struct PlotMatrix {
    split_label: String,
    head: HeadKind,
    values: Vec<Vec<f64>>,
    display: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct AccuracyGrid {
    splits: Vec<String>,
    heads: Vec<HeadKind>,
    values: Vec<Vec<Option<f64>>>,
    display: Vec<Vec<Option<String>>>,
}

#[derive(Serialize)]
struct PlotData {
    labels: Vec<String>,
    accuracy_grid: AccuracyGrid,
    matrices: Vec<PlotMatrix>,
}

pub fn to_plot_data(report: ReportRef<'_>) -> Result<String, EvalError> {
    let cells = report.cells();
    let mut splits: Vec<String> = Vec::new();
    let mut heads: Vec<HeadKind> = Vec::new();
    for c in &cells {
        let s = split_label(&c.split);
        if !splits.contains(&s) {
            splits.push(s);
        }
        if !heads.contains(&c.head) {
            heads.push(c.head);
        }
    }
    let values: Vec<Vec<Option<f64>>> = splits
        .iter()
        .map(|s| {
            heads
                .iter()
                .map(|h| {
                    cells
                        .iter()
                        .find(|c| c.head == *h && &split_label(&c.split) == s)
                        .map(|c| c.overall_accuracy)
                })
                .collect()
        })
        .collect();
    let display = values
        .iter()
        .map(|row| row.iter().map(|v| v.map(display2)).collect())
        .collect();
    let matrices = cells
        .iter()
        .map(|c| PlotMatrix {
            split_label: split_label(&c.split),
            head: c.head,
            values: c.confusion.normalized.clone(),
            display: c
                .confusion
                .normalized
                .iter()
                .map(|row| row.iter().map(|&v| display2(v)).collect())
                .collect(),
        })
        .collect();
    let data = PlotData {
        labels: report.labels(),
        accuracy_grid: AccuracyGrid {
            splits,
            heads,
            values,
            display,
        },
        matrices,
    };
    let mut s = serde_json::to_string_pretty(&data)?;
    s.push('\n');
    Ok(s)
}

/// Writes one report file into `out_dir` (atomically) and returns its path:
/// `sweep.json`, `sweep.csv`, `sweep_plot_data.json`, or the `report*`
/// equivalents for a single evaluation.
pub fn emit_report<'a>(report: impl Into<ReportRef<'a>>, format: ReportFormat, out_dir: &Path) -> Result<PathBuf, EvalError> {
    let report = report.into();
    let (name, body) = match format {
        ReportFormat::Json => (format!("{}.json", report.stem()), to_json(report)?),
        ReportFormat::Csv => (format!("{}.csv", report.stem()), to_csv(report)),
        ReportFormat::PlotData => (format!("{}_plot_data.json", report.stem()), to_plot_data(report)?),
    };
    let path = out_dir.join(name);
    crate::io::write_atomic(&path, body.as_bytes()).map_err(|source| EvalError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
