//! Test-set metrics, alpha sweeps, run comparisons and report files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::pipeline::{EpochLog, PipelineConfig};

/// Flag raised when precision has no predicted Fake to divide by.
pub const FLAG_PRECISION_UNDEFINED: &str = "precision_zero_denominator";
/// Flag raised when recall has no actual Fake to divide by.
pub const FLAG_RECALL_UNDEFINED: &str = "recall_zero_denominator";
/// Flag raised when the test set holds one class only, so AUC is reported as 0.5.
pub const FLAG_SINGLE_CLASS_TEST: &str = "single_class_test_auc_undefined";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

/// Accuracy, precision, recall and F1 with Fake as the positive class.
/// Zero denominators give 0.
pub fn confusion_metrics(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&pred, &truth) in predictions.iter().zip(labels) {
        match (pred.is_fake(), truth.is_fake()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let (precision, precision_defined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_defined) = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ConfusionMetrics {
        confusion: c,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1,
        precision_defined,
        recall_defined,
    })
}

/// Probability that a random Fake outscores a random Real, ties counting
/// one half. `scores` are fake-ness scores. Computed from midranks.
pub fn auc_roc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_fake = labels.iter().filter(|l| l.is_fake()).count();
    let n_real = labels.len() - n_fake;
    if n_fake == 0 || n_real == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs at least one news of each class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // ranks doubled so midranks stay integral
    let mut fake_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1, midrank (i + j + 2) / 2
        let midrank2 = (i + j + 2) as u64;
        let fakes = order[i..=j].iter().filter(|&&k| labels[k].is_fake()).count() as u64;
        fake_rank_sum2 += fakes * midrank2;
        i = j + 1;
    }
    let n_fake = n_fake as u64;
    let u2 = fake_rank_sum2 - n_fake * (n_fake + 1);
    Ok(u2 as f64 / 2.0 / (n_fake as f64 * n_real as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc_roc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    const NAMES: [&'static str; 5] = ["accuracy", "auc_roc", "precision", "recall", "f1"];

    fn values(&self) -> [f64; 5] {
        [self.accuracy, self.auc_roc, self.precision, self.recall, self.f1]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Metrics {
            accuracy: v[0],
            auc_roc: v[1],
            precision: v[2],
            recall: v[3],
            f1: v[4],
        }
    }

    /// Metric-wise mean, summed in slice order.
    pub fn mean(all: &[Metrics]) -> Metrics {
        let mut sum = [0.0; 5];
        for m in all {
            for (s, v) in sum.iter_mut().zip(m.values()) {
                *s += v;
            }
        }
        let n = all.len().max(1) as f64;
        Metrics::from_values(sum.map(|s| s / n))
    }
}

/// Test predictions turned into metrics and flags.
pub fn score_predictions(
    credibility: &[f64],
    dt: f64,
    labels: &[Label],
) -> Result<(Metrics, Vec<String>)> {
    let predictions: Vec<Label> = credibility
        .iter()
        .map(|&ce| crate::annotator::pseudo_label(ce, dt))
        .collect();
    let cm = confusion_metrics(&predictions, labels)?;
    let mut flags = Vec::new();
    if !cm.precision_defined {
        flags.push(FLAG_PRECISION_UNDEFINED.to_string());
    }
    if !cm.recall_defined {
        flags.push(FLAG_RECALL_UNDEFINED.to_string());
    }
    let fakeness: Vec<f64> = credibility.iter().map(|ce| 1.0 - ce).collect();
    let auc = match auc_roc(&fakeness, labels) {
        Ok(auc) => auc,
        Err(_) => {
            flags.push(FLAG_SINGLE_CLASS_TEST.to_string());
            0.5
        }
    };
    Ok((
        Metrics {
            accuracy: cm.accuracy,
            auc_roc: auc,
            precision: cm.precision,
            recall: cm.recall,
            f1: cm.f1,
        },
        flags,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    /// Unix time in seconds when the run (or its resumption) started.
    pub started_unix: f64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub accuracy: f64,
    pub auc_roc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<String>,
    pub final_dt: f64,
    pub test_size: usize,
    pub seed: u64,
    pub config: PipelineConfig,
    pub epoch_logs: Vec<EpochLog>,
    pub timing: Timing,
}

impl RunReport {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy,
            auc_roc: self.auc_roc,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }

    /// The report with timing zeroed; equal inputs give byte-equal JSON.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            timing: Timing::default(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<RunReport> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            what: "run report",
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub runs: usize,
    pub accuracy: f64,
    pub auc_roc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Per-run reports, grid-major then seed order.
    pub reports: Vec<RunReport>,
}

impl SweepTable {
    /// Row with the highest mean accuracy; the first such row on ties.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().fold(None, |best: Option<&SweepRow>, row| match best {
            Some(b) if b.accuracy >= row.accuracy => Some(b),
            _ => Some(row),
        })
    }

    pub fn row(&self, alpha: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }
}

/// `runs` pipeline runs per alpha with seeds `seed, seed + 1, ...`, averaged.
///
/// Runs execute concurrently on up to `jobs` threads (0 means all cores);
/// results are assembled in grid order and do not depend on `jobs`.
pub fn sweep_alpha(
    grid: &[f64],
    runs: usize,
    config: &PipelineConfig,
    dataset: &Dataset,
    jobs: usize,
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let mut configs = Vec::with_capacity(grid.len() * runs);
    for &alpha in grid {
        for r in 0..runs {
            let mut c = config.clone();
            c.alpha = alpha;
            c.seed = config.seed.wrapping_add(r as u64);
            c.validate()?;
            configs.push(c);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))?;
    let reports: Vec<RunReport> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| crate::pipeline::run(c, dataset))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = grid
        .iter()
        .zip(reports.chunks(runs))
        .map(|(&alpha, chunk)| {
            let metrics: Vec<Metrics> = chunk.iter().map(RunReport::metrics).collect();
            let m = Metrics::mean(&metrics);
            SweepRow {
                alpha,
                runs,
                accuracy: m.accuracy,
                auc_roc: m.auc_roc,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            }
        })
        .collect();
    Ok(SweepTable { rows, reports })
}

/// Signed per-metric differences `a - b`.
pub fn compare(a: &Metrics, b: &Metrics) -> Metrics {
    let (va, vb) = (a.values(), b.values());
    Metrics::from_values([0, 1, 2, 3, 4].map(|i| va[i] - vb[i]))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Serialize(format!("{}: {other:?}", path.display())),
    }
}

/// `metric,value` rows.
pub fn write_metrics_csv(metrics: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"]).map_err(|e| csv_error(path, e))?;
    for (name, value) in Metrics::NAMES.iter().zip(metrics.values()) {
        w.write_record([name.to_string(), value.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `metric,a,b,delta` rows.
pub fn write_comparison_csv(a: &Metrics, b: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let delta = compare(a, b);
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "a", "b", "delta"]).map_err(|e| csv_error(path, e))?;
    for (i, name) in Metrics::NAMES.iter().enumerate() {
        w.write_record([
            name.to_string(),
            a.values()[i].to_string(),
            b.values()[i].to_string(),
            delta.values()[i].to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Alpha against every mean metric, one row per grid point.
pub fn write_sweep_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    for row in &table.rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Update number against the pseudo-label class distribution and the other
/// per-update quantities.
pub fn write_epoch_csv(logs: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    for log in logs {
        w.serialize(log).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Human-readable comparison table.
pub fn write_comparison_table(a: &Metrics, b: &Metrics, out: &mut impl Write) -> std::io::Result<()> {
    let delta = compare(a, b);
    writeln!(out, "{:<10} {:>9} {:>9} {:>9}", "metric", "a", "b", "a-b")?;
    for (i, name) in Metrics::NAMES.iter().enumerate() {
        writeln!(
            out,
            "{:<10} {:>9.4} {:>9.4} {:>+9.4}",
            name,
            a.values()[i],
            b.values()[i],
            delta.values()[i]
        )?;
    }
    Ok(())
}
