//! Report documents: per-run metrics, training curves, and the cross-seed
//! comparison. Each has a JSON form and an aligned text table with
//! percentages to two decimals.

use std::fmt::Write as _;
use std::io::Write;

use ahfe_core::metrics::{ConfusionMatrix, MetricsReport};
use ahfe_core::train::TrainingCurves;
use serde::{Deserialize, Serialize};

pub const AVERAGING: &str = "macro";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDoc {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub averaging: String,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassDoc>,
    pub confusion_matrix: Vec<Vec<u64>>,
}

impl MetricsDoc {
    pub fn new(report: &MetricsReport, cm: &ConfusionMatrix) -> Self {
        MetricsDoc {
            averaging: AVERAGING.into(),
            accuracy: report.accuracy,
            macro_precision: report.macro_precision,
            macro_recall: report.macro_recall,
            macro_f1: report.macro_f1,
            per_class: report
                .per_class
                .iter()
                .enumerate()
                .map(|(class, c)| ClassDoc {
                    class,
                    precision: c.precision,
                    recall: c.recall,
                    f1: c.f1,
                    support: c.support,
                    precision_undefined: c.precision_undefined,
                    recall_undefined: c.recall_undefined,
                })
                .collect(),
            confusion_matrix: cm.rows(),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Renders rows as a left-aligned table with two-space column gaps.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

pub const METRIC_COLUMNS: [&str; 4] = ["Accuracy (%)", "Precision (%)", "Recall (%)", "F1-Score (%)"];

/// Single-run table: one summary row, then the per-class breakdown.
pub fn metrics_table(model: &str, loss: &str, doc: &MetricsDoc) -> String {
    let mut header = vec!["Model", "Loss"];
    header.extend(METRIC_COLUMNS);
    let summary = vec![
        model.to_string(),
        loss.to_string(),
        pct(doc.accuracy),
        pct(doc.macro_precision),
        pct(doc.macro_recall),
        pct(doc.macro_f1),
    ];
    let mut out = render_table(&header, &[summary]);
    let _ = writeln!(out, "Precision, recall and F1 are {AVERAGING} averages over classes.\n");
    let rows: Vec<Vec<String>> = doc
        .per_class
        .iter()
        .map(|c| {
            let mut notes = Vec::new();
            if c.precision_undefined {
                notes.push("no predictions");
            }
            if c.recall_undefined {
                notes.push("no samples");
            }
            vec![
                c.class.to_string(),
                pct(c.precision),
                pct(c.recall),
                pct(c.f1),
                c.support.to_string(),
                notes.join(", "),
            ]
        })
        .collect();
    out.push_str(&render_table(
        &[
            "Class",
            "Precision (%)",
            "Recall (%)",
            "F1-Score (%)",
            "Support",
            "Notes",
        ],
        &rows,
    ));
    out
}

pub const CURVES_HEADER: &str = "epoch,train_loss,val_loss,train_acc,val_acc";

pub fn write_curves<W: Write>(mut out: W, curves: &TrainingCurves) -> std::io::Result<()> {
    writeln!(out, "{CURVES_HEADER}")?;
    for r in &curves.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss, r.train_accuracy, r.val_accuracy
        )?;
    }
    out.flush()
}

/// Median and interquartile range (linear-interpolated quartiles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        Some(Summary {
            median: quantile(&v, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDoc {
    pub loss: String,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curves_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateDoc {
    pub loss: String,
    pub runs: usize,
    pub failed: usize,
    pub accuracy: Option<Summary>,
    pub macro_precision: Option<Summary>,
    pub macro_recall: Option<Summary>,
    pub macro_f1: Option<Summary>,
    /// Median recall per class across seeds.
    pub per_class_recall_median: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub model: String,
    pub averaging: String,
    pub split: String,
    pub seeds: Vec<u64>,
    pub aggregates: Vec<AggregateDoc>,
    pub cells: Vec<CellDoc>,
}

impl AggregateDoc {
    pub fn from_cells(loss: &str, cells: &[&CellDoc]) -> Self {
        let ok: Vec<&MetricsDoc> = cells.iter().filter_map(|c| c.metrics.as_ref()).collect();
        let collect = |f: fn(&MetricsDoc) -> f64| Summary::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
        let num_classes = ok.first().map_or(0, |m| m.per_class.len());
        let per_class_recall_median = (0..num_classes)
            .map(|k| {
                let recalls: Vec<f64> = ok.iter().map(|m| m.per_class[k].recall).collect();
                Summary::of(&recalls).map_or(f64::NAN, |s| s.median)
            })
            .collect();
        AggregateDoc {
            loss: loss.to_string(),
            runs: cells.len(),
            failed: cells.len() - ok.len(),
            accuracy: collect(|m| m.accuracy),
            macro_precision: collect(|m| m.macro_precision),
            macro_recall: collect(|m| m.macro_recall),
            macro_f1: collect(|m| m.macro_f1),
            per_class_recall_median,
        }
    }
}

/// Side-by-side table: one row per loss with the cross-seed median and
/// the IQR in brackets, followed by median per-class recall.
pub fn comparison_table(doc: &ComparisonDoc) -> String {
    let cell = |s: &Option<Summary>| match s {
        Some(s) => format!("{} [{}]", pct(s.median), pct(s.iqr)),
        None => "failed".to_string(),
    };
    let mut header = vec!["Loss", "Model", "Runs"];
    header.extend(METRIC_COLUMNS);
    let rows: Vec<Vec<String>> = doc
        .aggregates
        .iter()
        .map(|a| {
            vec![
                a.loss.clone(),
                doc.model.clone(),
                format!("{}/{}", a.runs - a.failed, a.runs),
                cell(&a.accuracy),
                cell(&a.macro_precision),
                cell(&a.macro_recall),
                cell(&a.macro_f1),
            ]
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Validation metrics over {} seeds: median [IQR], {AVERAGING}-averaged precision/recall/F1.\n",
        doc.seeds.len()
    );
    out.push_str(&render_table(&header, &rows));

    let num_classes = doc
        .aggregates
        .iter()
        .map(|a| a.per_class_recall_median.len())
        .max()
        .unwrap_or(0);
    if num_classes > 0 {
        out.push('\n');
        let class_headers: Vec<String> = (0..num_classes).map(|k| format!("Class {k}")).collect();
        let mut header = vec!["Median recall (%)"];
        header.extend(class_headers.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = doc
            .aggregates
            .iter()
            .map(|a| {
                let mut row = vec![a.loss.clone()];
                row.extend(a.per_class_recall_median.iter().map(|&r| pct(r)));
                row
            })
            .collect();
        out.push_str(&render_table(&header, &rows));
    }

    let failed: Vec<&CellDoc> = doc.cells.iter().filter(|c| c.status != "ok").collect();
    if !failed.is_empty() {
        out.push_str("\nFailed runs:\n");
        for c in failed {
            let _ = writeln!(
                out,
                "  {} seed {}: {}",
                c.loss,
                c.seed,
                c.error.as_deref().unwrap_or("unknown error")
            );
        }
    }
    out
}
