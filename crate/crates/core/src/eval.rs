//! Confusion matrices, classification metrics and corpus evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    classify_hair, classify_iris, classify_skin, classify_undertone, classify_undertone_cosine,
    vein_mean, Classification,
};
use crate::config::{Pipeline, PipelineSetup, UndertoneStrategy};
use crate::error::{Error, Result};
use crate::imaging::{decode_image, load_mask, Landmarks};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    /// `counts[truth][predicted]`.
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate label {l:?}")));
            }
        }
        let n = labels.len();
        Ok(Self {
            labels,
            counts: vec![vec![0; n]; n],
        })
    }

    pub fn from_counts<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let mut cm = Self::new(labels)?;
        let n = cm.labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("counts must be {n}×{n}")));
        }
        cm.counts = counts;
        Ok(cm)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let t = self.index_of(truth)?;
        let p = self.index_of(predicted)?;
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Micro accuracy, trace over total.
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest metrics per class plus unweighted macro means. Ratios with a
/// zero denominator are 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if cm.labels.is_empty() || total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = cm.labels.len();
    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|i| {
            let tp = cm.counts[i][i];
            let row: u64 = cm.counts[i].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
            let fp = col - tp;
            let fn_ = row - tp;
            let tn = total - tp - fp - fn_;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: cm.labels[i].clone(),
                tp,
                fp,
                fn_,
                tn,
                accuracy: ratio(tp + tn, total),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    Ok(Metrics {
        accuracy: ratio(cm.trace(), total),
        macro_accuracy: mean(|c| c.accuracy),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
    })
}

impl Metrics {
    /// Plain-text table; the first line is `accuracy <value>`.
    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.label.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut s = format!("accuracy {:.4}\n", self.accuracy);
        let _ = writeln!(s, "{:<width$}  precision  recall  f1      support", "class");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<width$}  {:<9.4}  {:<6.4}  {:<6.4}  {}",
                c.label,
                c.precision,
                c.recall,
                c.f1,
                c.tp + c.fn_
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:<9.4}  {:<6.4}  {:<6.4}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1
        );
        s
    }
}

/// One manifest line with paths resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// The path as written in the manifest.
    pub entry: String,
    pub label: String,
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    path: String,
    label: String,
    #[serde(default)]
    mask_path: Option<String>,
    #[serde(default)]
    landmarks_path: Option<String>,
}

/// Reads `path,label[,mask_path][,landmarks_path]`.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let ctx = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::config(ctx.clone(), e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::config(ctx.clone(), e))?
        .clone();
    if headers.get(0) != Some("path") || headers.get(1) != Some("label") {
        return Err(Error::config(
            ctx,
            "manifest header must start with path,label",
        ));
    }
    let resolve = |s: &str| {
        let p = Path::new(s);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let nonempty = |s: Option<String>| s.filter(|s| !s.is_empty());
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<RawRow>().enumerate() {
        let raw = rec.map_err(|e| Error::config(format!("{ctx} row {}", i + 1), e))?;
        rows.push(ManifestRow {
            image: resolve(&raw.path),
            mask: nonempty(raw.mask_path).map(|s| resolve(&s)),
            landmarks: nonempty(raw.landmarks_path).map(|s| resolve(&s)),
            entry: raw.path,
            label: raw.label,
        });
    }
    Ok(rows)
}

/// Runs the configured pipeline on one manifest row.
pub fn run_row(setup: &PipelineSetup, row: &ManifestRow) -> Result<Classification> {
    let img = decode_image(&row.image)?;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone().ok_or_else(|| {
            Error::InvalidParameter(format!("manifest row {:?} has no {what}", row.entry))
        })
    };
    match setup.pipeline {
        Pipeline::Skin | Pipeline::SkinTwoStage => {
            let mask = load_mask(&need(&row.mask, "mask_path")?, &img)?;
            classify_skin(&img, &mask, &setup.scale, &setup.skin, setup.two_stage).map(|r| r.0)
        }
        Pipeline::Hair => {
            let mask = load_mask(&need(&row.mask, "mask_path")?, &img)?;
            classify_hair(&img, &mask, &setup.scale, setup.seed)
        }
        Pipeline::Iris => {
            let lm = Landmarks::load(&need(&row.landmarks, "landmarks_path")?)?;
            classify_iris(&img, &lm, &setup.scale)
        }
        Pipeline::Undertone => match setup.strategy {
            UndertoneStrategy::DeltaE => {
                classify_undertone(&img, &setup.thresholds, &setup.refs, setup.close_radius)
            }
            UndertoneStrategy::Cosine => {
                let (mean, n) = vein_mean(&img, &setup.thresholds, setup.close_radius)?;
                let mut c = classify_undertone_cosine(mean, &setup.refs)?;
                c.metadata.insert("pixel_count".into(), n as f64);
                Ok(c)
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub path: String,
    pub truth: String,
    pub outcome: std::result::Result<Classification, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub rows: Vec<ReportRow>,
}

impl Evaluation {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn metrics(&self) -> Result<Metrics> {
        metrics(&self.matrix)
    }

    /// Report CSV, one line per manifest row in manifest order.
    pub fn report_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::config("report", e);
        w.write_record([
            "path",
            "truth",
            "predicted",
            "distance",
            "dominant_l",
            "dominant_a",
            "dominant_b",
            "cluster_share",
            "status",
        ])
        .map_err(io)?;
        for r in &self.rows {
            let fields: [String; 9] = match &r.outcome {
                Ok(c) => [
                    r.path.clone(),
                    r.truth.clone(),
                    c.label.clone(),
                    format!("{:.6}", c.distance),
                    format!("{:.6}", c.dominant.l),
                    format!("{:.6}", c.dominant.a),
                    format!("{:.6}", c.dominant.b),
                    c.cluster_share()
                        .map(|s| format!("{s:.6}"))
                        .unwrap_or_default(),
                    "ok".into(),
                ],
                Err(msg) => [
                    r.path.clone(),
                    r.truth.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("error: {msg}"),
                ],
            };
            w.write_record(&fields).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::config("report", e))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_report(&self, path: &Path) -> Result<()> {
        fs::write(path, self.report_csv()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Labels the matrix is indexed by: leaf names for two-level scales.
pub fn matrix_labels(setup: &PipelineSetup) -> Vec<String> {
    if setup.scale.has_subclasses() {
        setup.scale.leaf_labels()
    } else {
        setup.scale.names().into_iter().map(String::from).collect()
    }
}

/// Classifies every manifest row, `jobs` at a time, and tallies the
/// results in manifest order. Rows that fail, including rows whose truth
/// label is not in the scale, are reported and left out of the matrix.
pub fn evaluate_rows(
    setup: &PipelineSetup,
    rows: &[ManifestRow],
    jobs: usize,
) -> Result<Evaluation> {
    let run =
        || -> Vec<Result<Classification>> { rows.par_iter().map(|r| run_row(setup, r)).collect() };
    let outcomes = if jobs <= 1 {
        rows.iter().map(|r| run_row(setup, r)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} workers: {e}")))?
            .install(run)
    };

    let mut matrix = ConfusionMatrix::new(matrix_labels(setup))?;
    let mut report = Vec::with_capacity(rows.len());
    for (row, outcome) in rows.iter().zip(outcomes) {
        let outcome = outcome
            .and_then(|c| matrix.record(&row.label, &c.label).map(|_| c))
            .map_err(|e| e.to_string());
        report.push(ReportRow {
            path: row.entry.clone(),
            truth: row.label.clone(),
            outcome,
        });
    }
    Ok(Evaluation {
        matrix,
        rows: report,
    })
}

pub fn evaluate_corpus(manifest: &Path, setup: &PipelineSetup, jobs: usize) -> Result<Evaluation> {
    evaluate_rows(setup, &read_manifest(manifest)?, jobs)
}
