use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::labeler::SurfaceLabel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    /// Ground-truth count (confusion row sum).
    pub support: usize,
    pub predicted: usize,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs in the ground truth.
    pub recall: Option<f64>,
    /// `None` when the class is absent from both truth and predictions; 0
    /// when it occurs but is never correctly predicted.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 4]; 4],
    pub per_class: Vec<ClassMetrics>,
    pub groups: Vec<GroupAccuracy>,
    /// Expected groups that had no samples.
    pub omitted_groups: Vec<String>,
}

/// Scores class indices `0..4` against the truth. Groups listed in
/// `expected_groups` but absent from `groups` are reported as omitted.
pub fn evaluate(
    predictions: &[usize],
    truth: &[usize],
    groups: &[String],
    expected_groups: &[String],
) -> Result<EvalReport> {
    if predictions.len() != truth.len() || groups.len() != truth.len() {
        return Err(Error::Shape(format!(
            "evaluate needs equal lengths, got {} predictions, {} labels, {} groups",
            predictions.len(),
            truth.len(),
            groups.len()
        )));
    }
    if let Some(bad) = predictions.iter().chain(truth).find(|&&c| c >= 4) {
        return Err(Error::InvalidArgument(format!("label {bad} outside 0..3")));
    }
    let mut confusion = [[0usize; 4]; 4];
    let mut by_group: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ((&p, &t), g) in predictions.iter().zip(truth).zip(groups) {
        confusion[t][p] += 1;
        let e = by_group.entry(g.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(p == t);
    }
    let total = truth.len();
    let correct: usize = (0..4).map(|i| confusion[i][i]).sum();
    let per_class = SurfaceLabel::ALL
        .iter()
        .map(|&label| {
            let c = label as usize;
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..4).map(|r| confusion[r][c]).sum();
            let precision = (predicted > 0).then(|| tp as f64 / predicted as f64);
            let recall = (support > 0).then(|| tp as f64 / support as f64);
            let f1 = if support == 0 && predicted == 0 {
                None
            } else if tp == 0 {
                Some(0.0)
            } else {
                let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
                Some(2.0 * p * r / (p + r))
            };
            ClassMetrics {
                label: label.name().to_owned(),
                support,
                predicted,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let omitted_groups: Vec<String> = expected_groups
        .iter()
        .filter(|g| !by_group.contains_key(g.as_str()))
        .cloned()
        .collect();
    for g in &omitted_groups {
        log::warn!("group {g} has no samples and is omitted from the report");
    }
    Ok(EvalReport {
        total,
        correct,
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        confusion,
        per_class,
        groups: by_group
            .into_iter()
            .map(|(g, (count, correct))| GroupAccuracy {
                group: g.to_owned(),
                count,
                correct,
                accuracy: correct as f64 / count as f64,
            })
            .collect(),
        omitted_groups,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// One row per group plus an `all` row: group, count, correct, accuracy.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let rows = self
            .groups
            .iter()
            .map(|g| (g.group.as_str(), g.count, g.correct, g.accuracy))
            .chain(std::iter::once(("all", self.total, self.correct, self.accuracy)));
        w.write_record(["group", "count", "correct", "accuracy"])
            .map_err(|e| Error::io(path, e.into()))?;
        for (g, n, c, a) in rows {
            w.write_record([g.to_owned(), n.to_string(), c.to_string(), format!("{a:.6}")])
                .map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
