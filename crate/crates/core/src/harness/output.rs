use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AggregateResult, ExperimentResult, Metric, RunRecord, Variant};
use crate::agent::EpochReport;
use crate::error::{Error, Result};

pub const EPOCH_HEADER: [&str; 8] = [
    "run_id",
    "epoch",
    "train_sr",
    "test_sr",
    "loss",
    "buffer_size",
    "flushed",
    "explore_sr",
];

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    run_id: String,
    variant: String,
    subset_size: usize,
    repeat: usize,
    seed: u64,
    final_train_sr: f64,
    final_test_sr: f64,
    failed: bool,
    best_test_sr: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AggregateRow {
    variant: String,
    x: usize,
    mean: f64,
    ci95: f64,
    n: usize,
}

/// Files written by an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutputs {
    pub runs: PathBuf,
    pub epochs: PathBuf,
    pub aggregate_test: PathBuf,
    pub aggregate_train: PathBuf,
    pub curve_test: PathBuf,
    pub curve_train: PathBuf,
}

impl ExperimentOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        ExperimentOutputs {
            runs: dir.join("runs.csv"),
            epochs: dir.join("epochs.csv"),
            aggregate_test: dir.join("aggregate_test.csv"),
            aggregate_train: dir.join("aggregate_train.csv"),
            curve_test: dir.join("curve_test.csv"),
            curve_train: dir.join("curve_train.csv"),
        }
    }

    /// Writes every table. Learning curves use the smallest subset size.
    pub fn write(&self, result: &ExperimentResult) -> Result<()> {
        write_runs_csv(&self.runs, &result.runs)?;
        write_epochs_csv(&self.epochs, &result.runs)?;
        write_aggregate_csv(&self.aggregate_test, &result.by_size(Metric::Test))?;
        write_aggregate_csv(&self.aggregate_train, &result.by_size(Metric::Train))?;
        let size = result.runs.iter().map(|r| r.subset_size).min().unwrap_or(0);
        write_aggregate_csv(&self.curve_test, &result.curves(size, Metric::Test))?;
        write_aggregate_csv(&self.curve_train, &result.curves(size, Metric::Train))?;
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        index: e.position().map_or(0, |p| p.record() as usize),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    crate::error::write_file(path, &bytes)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    csv::Reader::from_reader(text.as_slice())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub fn write_runs_csv(path: &Path, runs: &[RunRecord]) -> Result<()> {
    write_csv(
        path,
        runs.iter().map(|r| RunRow {
            run_id: r.run_id.clone(),
            variant: r.variant.name().to_string(),
            subset_size: r.subset_size,
            repeat: r.repeat,
            seed: r.seed,
            final_train_sr: r.final_train_sr,
            final_test_sr: r.final_test_sr,
            failed: r.failed,
            best_test_sr: r.best_test_sr,
        }),
    )
}

/// Reads a per-run table back. Epoch reports and warm-start details are
/// not part of it.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>> {
    read_csv::<RunRow>(path)?
        .into_iter()
        .map(|row| {
            Ok(RunRecord {
                run_id: row.run_id,
                variant: row.variant.parse()?,
                subset_size: row.subset_size,
                repeat: row.repeat,
                seed: row.seed,
                final_train_sr: row.final_train_sr,
                final_test_sr: row.final_test_sr,
                best_test_sr: row.best_test_sr,
                failed: row.failed,
                warm_start: None,
                reports: Vec::new(),
            })
        })
        .collect()
}

/// Epoch rows in the layout of [`EPOCH_HEADER`].
pub fn epoch_rows<'a>(run_id: &'a str, reports: &'a [EpochReport]) -> impl Iterator<Item = [String; 8]> + 'a {
    reports.iter().map(move |r| {
        [
            run_id.to_string(),
            r.epoch.to_string(),
            r.train_success_rate.to_string(),
            r.test_success_rate.to_string(),
            r.mean_loss.to_string(),
            r.buffer_size.to_string(),
            r.flushed.to_string(),
            r.explore_success_rate.to_string(),
        ]
    })
}

pub fn write_epoch_csv(out: impl Write, run_id: &str, reports: &[EpochReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EPOCH_HEADER)?;
    for row in epoch_rows(run_id, reports) {
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_epochs_csv(path: &Path, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EPOCH_HEADER)?;
    for r in runs {
        for row in epoch_rows(&r.run_id, &r.reports) {
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    crate::error::write_file(path, &bytes)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateResult]) -> Result<()> {
    write_csv(
        path,
        rows.iter().map(|a| AggregateRow {
            variant: a.variant.name().to_string(),
            x: a.x,
            mean: a.mean,
            ci95: a.ci95,
            n: a.n,
        }),
    )
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateResult>> {
    read_csv::<AggregateRow>(path)?
        .into_iter()
        .map(|row| {
            Ok(AggregateResult {
                variant: row.variant.parse::<Variant>()?,
                x: row.x,
                mean: row.mean,
                ci95: row.ci95,
                n: row.n,
            })
        })
        .collect()
}
