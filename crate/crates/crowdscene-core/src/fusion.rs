//! Per-segment aggregation of patch probabilities and late fusion of
//! multiple frameworks' segment probabilities.
//!
//! Aggregation is the componentwise mean over a segment's patches. Fusion
//! combines S frameworks per segment: MEAN averages, PROD takes the scaled
//! product `(1/S) * prod_s p_sc` (the scale cannot move the argmax), MAX the
//! componentwise maximum. PROD and MAX results are stored as-is, without
//! renormalization; `is_distribution` on the prediction records whether the
//! vector still sums to one.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::manifest::SceneLabel;
use crate::nn::ProbVector;
use crate::CLASS_COUNT;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("cannot aggregate an empty probability list")]
    EmptyList,
    #[error("fusion needs at least one framework")]
    EmptyFrameworks,
    #[error("framework {framework:?} covers a different segment set (first difference: {detail})")]
    SegmentSetMismatch { framework: String, detail: String },
    #[error("probability csv: {0}")]
    Csv(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A per-segment probability vector with its argmax label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPrediction {
    pub segment_id: String,
    pub prob: ProbVector,
    pub label: SceneLabel,
    /// Name of the framework (or fusion) that produced this prediction.
    pub source: String,
    /// Whether `prob` sums to one; false for raw PROD/MAX fusion outputs.
    pub is_distribution: bool,
}

impl SegmentPrediction {
    pub fn new(segment_id: String, prob: ProbVector, source: String) -> Self {
        let label = predict_label(&prob);
        let is_distribution = prob.is_distribution(1e-5);
        Self {
            segment_id,
            prob,
            label,
            source,
            is_distribution,
        }
    }
}

/// Componentwise mean of N probability vectors.
pub fn aggregate_segment(patch_probs: &[ProbVector]) -> Result<ProbVector, FusionError> {
    if patch_probs.is_empty() {
        return Err(FusionError::EmptyList);
    }
    let n = patch_probs.len() as f64;
    let mut mean = [0.0f64; CLASS_COUNT];
    for p in patch_probs {
        for (m, &v) in mean.iter_mut().zip(p.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    Ok(ProbVector::new(mean))
}

/// Argmax with ties resolved to the lowest class code.
pub fn predict_label(prob: &ProbVector) -> SceneLabel {
    prob.argmax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionScheme {
    Mean,
    Prod,
    Max,
}

impl FusionScheme {
    pub fn name(self) -> &'static str {
        match self {
            FusionScheme::Mean => "mean",
            FusionScheme::Prod => "prod",
            FusionScheme::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(FusionScheme::Mean),
            "prod" => Some(FusionScheme::Prod),
            "max" => Some(FusionScheme::Max),
            _ => None,
        }
    }
}

impl std::fmt::Display for FusionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Predictions of one framework over a segment set.
#[derive(Debug, Clone)]
pub struct FrameworkPredictions {
    pub name: String,
    pub predictions: Vec<SegmentPrediction>,
}

/// S frameworks covering an identical segment set.
#[derive(Debug, Clone)]
pub struct FusionInput {
    pub frameworks: Vec<FrameworkPredictions>,
}

impl FusionInput {
    pub fn new(frameworks: Vec<FrameworkPredictions>) -> Result<Self, FusionError> {
        if frameworks.is_empty() {
            return Err(FusionError::EmptyFrameworks);
        }
        let reference: BTreeSet<&str> = frameworks[0]
            .predictions
            .iter()
            .map(|p| p.segment_id.as_str())
            .collect();
        for fw in &frameworks {
            let ids: BTreeSet<&str> =
                fw.predictions.iter().map(|p| p.segment_id.as_str()).collect();
            if ids != reference {
                let detail = reference
                    .symmetric_difference(&ids)
                    .next()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "duplicate segment ids".to_string());
                return Err(FusionError::SegmentSetMismatch {
                    framework: fw.name.clone(),
                    detail,
                });
            }
            // set equality cannot see repeats; the lengths can
            if fw.predictions.len() != reference.len() {
                return Err(FusionError::SegmentSetMismatch {
                    framework: fw.name.clone(),
                    detail: "duplicate segment ids".to_string(),
                });
            }
        }
        Ok(Self { frameworks })
    }

    pub fn framework_count(&self) -> usize {
        self.frameworks.len()
    }
}

/// Fuses per-framework segment probabilities. Output is sorted by segment id
/// and carries `"{scheme}-fusion"` as its source.
pub fn fuse(input: &FusionInput, scheme: FusionScheme) -> Result<Vec<SegmentPrediction>, FusionError> {
    let s_count = input.framework_count() as f64;
    // segment id -> per-framework vectors, sorted for deterministic output
    let mut by_segment: BTreeMap<&str, Vec<&ProbVector>> = BTreeMap::new();
    for fw in &input.frameworks {
        for p in &fw.predictions {
            by_segment.entry(&p.segment_id).or_default().push(&p.prob);
        }
    }
    let source = format!("{scheme}-fusion");
    Ok(by_segment
        .into_iter()
        .map(|(segment_id, vectors)| {
            let mut fused = [0.0f64; CLASS_COUNT];
            match scheme {
                FusionScheme::Mean => {
                    for v in &vectors {
                        for (f, &p) in fused.iter_mut().zip(v.values()) {
                            *f += p;
                        }
                    }
                    for f in &mut fused {
                        *f /= s_count;
                    }
                }
                FusionScheme::Prod => {
                    // log-space product; exp(-inf) collapses to 0 when any
                    // framework assigns zero probability
                    for (c, f) in fused.iter_mut().enumerate() {
                        let log_sum: f64 = vectors.iter().map(|v| v.values()[c].ln()).sum();
                        *f = log_sum.exp() / s_count;
                    }
                }
                FusionScheme::Max => {
                    for (c, f) in fused.iter_mut().enumerate() {
                        *f = vectors
                            .iter()
                            .map(|v| v.values()[c])
                            .fold(f64::NEG_INFINITY, f64::max);
                    }
                }
            }
            SegmentPrediction::new(segment_id.to_string(), ProbVector::new(fused), source.clone())
        })
        .collect())
}

pub const PROB_CSV_HEADER: [&str; 7] = [
    "segment_id",
    "framework",
    "p_riot",
    "p_noise_street",
    "p_firework_event",
    "p_music_event",
    "p_sport_atmosphere",
];

/// Writes predictions in the probability-CSV interchange format.
pub fn write_prob_csv(path: &Path, predictions: &[SegmentPrediction]) -> Result<(), FusionError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FusionError::Csv(e.to_string()))?;
    w.write_record(PROB_CSV_HEADER)
        .map_err(|e| FusionError::Csv(e.to_string()))?;
    for p in predictions {
        let v = p.prob.values();
        w.write_record([
            p.segment_id.as_str(),
            p.source.as_str(),
            &format!("{}", v[0]),
            &format!("{}", v[1]),
            &format!("{}", v[2]),
            &format!("{}", v[3]),
            &format!("{}", v[4]),
        ])
        .map_err(|e| FusionError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a probability CSV, grouping rows into frameworks in encounter
/// order. A file may carry several frameworks.
pub fn read_prob_csv(path: &Path) -> Result<Vec<FrameworkPredictions>, FusionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| FusionError::Csv(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| FusionError::Csv(e.to_string()))?;
    if headers.iter().ne(PROB_CSV_HEADER.iter().copied()) {
        return Err(FusionError::Csv(format!(
            "unexpected header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<SegmentPrediction>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| FusionError::Csv(e.to_string()))?;
        if row.len() != PROB_CSV_HEADER.len() {
            return Err(FusionError::Csv(format!(
                "expected {} fields, got {}",
                PROB_CSV_HEADER.len(),
                row.len()
            )));
        }
        let segment_id = row.get(0).unwrap_or("").to_string();
        let framework = row.get(1).unwrap_or("").to_string();
        let mut values = [0.0f64; CLASS_COUNT];
        for (i, v) in values.iter_mut().enumerate() {
            let field = row.get(2 + i).unwrap_or("");
            *v = field
                .trim()
                .parse()
                .map_err(|e| FusionError::Csv(format!("bad probability {field:?}: {e}")))?;
            if !v.is_finite() || *v < 0.0 {
                return Err(FusionError::Csv(format!("probability {v} out of range")));
            }
        }
        if !groups.contains_key(&framework) {
            order.push(framework.clone());
        }
        groups.entry(framework.clone()).or_default().push(
            SegmentPrediction::new(segment_id, ProbVector::new(values), framework),
        );
    }
    Ok(order
        .into_iter()
        .map(|name| FrameworkPredictions {
            predictions: groups.remove(&name).expect("group exists"),
            name,
        })
        .collect())
}
