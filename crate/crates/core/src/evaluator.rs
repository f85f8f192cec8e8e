//! ROCAUC and per-class reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::video_scorer::ScoreRecord;

/// Area under the ROC curve with anomalous as the positive class.
///
/// Computed as the Mann–Whitney statistic from mid-ranks, so tied scores
/// earn half credit. Runs in O(n log n).
pub fn rocauc(records: &[ScoreRecord]) -> Result<f64> {
    let pairs: Vec<(f64, bool)> = records.iter().map(|r| (r.score, r.label.is_anomalous())).collect();
    auc_from_pairs(&pairs, "records")
}

/// [`rocauc`] over raw `(score, is_anomalous)` pairs.
pub fn rocauc_scores(scores: &[(f64, bool)]) -> Result<f64> {
    auc_from_pairs(scores, "scores")
}

fn auc_from_pairs(pairs: &[(f64, bool)], scope: &str) -> Result<f64> {
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric {
            scope: scope.to_owned(),
            reason: format!("needs both labels, got {negatives} normal and {positives} anomalous"),
        });
    }
    if pairs.iter().any(|p| !p.0.is_finite()) {
        return Err(Error::Contract(format!("non-finite score in {scope}")));
    }

    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of 1-based mid-ranks of the positives, doubled to stay integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].0 == sorted[start].0 {
            end += 1;
        }
        let tied_pos = sorted[start..end].iter().filter(|p| p.1).count() as u128;
        // mid-rank of positions start+1..=end is (start+1+end)/2
        doubled_rank_sum += tied_pos * (start + 1 + end) as u128;
        start = end;
    }
    let (p, n) = (positives as u128, negatives as u128);
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub normal: usize,
    pub anomalous: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocReport {
    pub per_class: BTreeMap<String, f64>,
    /// Unweighted mean over classes.
    pub average: f64,
    pub counts: BTreeMap<String, ClassCounts>,
}

/// Per-class ROCAUC plus the class average. Fails on the first class (in
/// lexicographic order) lacking either label.
pub fn build_report(records: &[ScoreRecord]) -> Result<RocReport> {
    let mut by_class: BTreeMap<&str, Vec<(f64, bool)>> = BTreeMap::new();
    for r in records {
        by_class
            .entry(r.class_name.as_str())
            .or_default()
            .push((r.score, r.label.is_anomalous()));
    }
    if by_class.is_empty() {
        return Err(Error::UndefinedMetric { scope: "report".into(), reason: "no records".into() });
    }
    let mut per_class = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (class, pairs) in by_class {
        let auc = auc_from_pairs(&pairs, &format!("class {class:?}"))?;
        let anomalous = pairs.iter().filter(|p| p.1).count();
        per_class.insert(class.to_owned(), auc);
        counts.insert(class.to_owned(), ClassCounts { normal: pairs.len() - anomalous, anomalous });
    }
    let average = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(RocReport { per_class, average, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Contract(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn render_report(report: &RocReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_table(report: &RocReport) -> String {
    let width = report
        .per_class
        .keys()
        .map(|k| k.chars().count())
        .chain(["Average".len(), "Class".len()])
        .max()
        .unwrap();
    let mut out = String::new();
    writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>9}", "Class", "ROCAUC", "Normal", "Anomalous").unwrap();
    for (class, auc) in &report.per_class {
        let c = report.counts[class];
        writeln!(out, "{class:<width$}  {auc:>6.2}  {:>6}  {:>9}", c.normal, c.anomalous).unwrap();
    }
    writeln!(out, "{:<width$}  {:>6.2}", "Average", report.average).unwrap();
    out
}

fn render_csv(report: &RocReport) -> String {
    let mut out = String::from("class,rocauc,normal,anomalous\n");
    for (class, auc) in &report.per_class {
        let c = report.counts[class];
        writeln!(out, "{},{auc},{},{}", csv_field(class), c.normal, c.anomalous).unwrap();
    }
    writeln!(out, "Average,{},,", report.average).unwrap();
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
