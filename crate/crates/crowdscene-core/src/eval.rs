//! Accuracy and confusion-matrix evaluation: Acc% = 100 * M / N over the
//! segments of one split.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::fusion::SegmentPrediction;
use crate::manifest::{DatasetManifest, SceneLabel, Split};
use crate::CLASS_COUNT;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions do not cover the split: {missing} missing, {extra} extra (e.g. {example:?})")]
    CoverageMismatch {
        missing: usize,
        extra: usize,
        example: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub accuracy_pct: f64,
    /// Correctly predicted segments.
    #[serde(rename = "M")]
    pub m: u32,
    /// Total segments.
    #[serde(rename = "N")]
    pub n: u32,
    /// Rows are ground truth, columns predictions.
    pub confusion: [[u32; CLASS_COUNT]; CLASS_COUNT],
    /// Diagonal over row sum; 0 for classes absent from the split.
    pub per_class_accuracy: [f64; CLASS_COUNT],
}

impl EvalReport {
    pub fn trace(&self) -> u32 {
        (0..CLASS_COUNT).map(|i| self.confusion[i][i]).sum()
    }

    pub fn cell_sum(&self) -> u32 {
        self.confusion.iter().flatten().sum()
    }

    /// Plain-text rendering: accuracy to one decimal plus the 5x5 table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "accuracy {:.1}% ({} / {})\n\n",
            self.accuracy_pct, self.m, self.n
        ));
        let width = 17;
        out.push_str(&format!("{:>width$} |", "truth \\ predicted"));
        for label in SceneLabel::ALL {
            out.push_str(&format!("{:>17}", label.name()));
        }
        out.push('\n');
        out.push_str(&"-".repeat(width + 2 + 17 * CLASS_COUNT));
        out.push('\n');
        for (i, label) in SceneLabel::ALL.iter().enumerate() {
            out.push_str(&format!("{:>width$} |", label.name()));
            for j in 0..CLASS_COUNT {
                out.push_str(&format!("{:>17}", self.confusion[i][j]));
            }
            out.push_str(&format!("  ({:.1}%)\n", 100.0 * self.per_class_accuracy[i]));
        }
        out
    }
}

/// Scores predictions against the ground truth of one split. The prediction
/// set must cover the split's segment ids exactly, duplicates count as
/// extras.
pub fn evaluate(
    predictions: &[SegmentPrediction],
    truth: &DatasetManifest,
    split: Split,
) -> Result<EvalReport, EvalError> {
    let mut expected: BTreeMap<String, SceneLabel> = truth
        .split_records(split)
        .map(|r| (r.segment_id(), r.label))
        .collect();
    let total = expected.len();

    let mut confusion = [[0u32; CLASS_COUNT]; CLASS_COUNT];
    let mut extra = 0usize;
    let mut example = String::new();
    for p in predictions {
        match expected.remove(&p.segment_id) {
            Some(truth_label) => {
                confusion[truth_label.code()][p.label.code()] += 1;
            }
            None => {
                extra += 1;
                if example.is_empty() {
                    example = format!("extra {}", p.segment_id);
                }
            }
        }
    }
    if !expected.is_empty() || extra > 0 {
        if example.is_empty() {
            example = format!("missing {}", expected.keys().next().expect("non-empty"));
        }
        return Err(EvalError::CoverageMismatch {
            missing: expected.len(),
            extra,
            example,
        });
    }

    let m: u32 = (0..CLASS_COUNT).map(|i| confusion[i][i]).sum();
    let n = total as u32;
    let mut per_class_accuracy = [0.0f64; CLASS_COUNT];
    for (i, acc) in per_class_accuracy.iter_mut().enumerate() {
        let row_sum: u32 = confusion[i].iter().sum();
        if row_sum > 0 {
            *acc = f64::from(confusion[i][i]) / f64::from(row_sum);
        }
    }
    Ok(EvalReport {
        accuracy_pct: 100.0 * f64::from(m) / f64::from(n),
        m,
        n,
        confusion,
        per_class_accuracy,
    })
}
