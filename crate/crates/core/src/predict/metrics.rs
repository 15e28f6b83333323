//! Regression metrics: MAE, MSE, Spearman rank correlation, and a
//! cross-entropy loss over range-normalized popularity scores.

use serde::{Deserialize, Serialize};

use super::{PredictError, PredictionRecord};

pub fn mae(labels: &[f64], preds: &[f64]) -> f64 {
    assert_eq!(labels.len(), preds.len());
    let total: f64 = labels.iter().zip(preds).map(|(y, p)| (y - p).abs()).sum();
    total / labels.len() as f64
}

pub fn mse(labels: &[f64], preds: &[f64]) -> f64 {
    assert_eq!(labels.len(), preds.len());
    let total: f64 = labels.iter().zip(preds).map(|(y, p)| (y - p).powi(2)).sum();
    total / labels.len() as f64
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mean of ranks i+1..=j+1.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation via the single-pass computational formula. None when
/// either side has zero variance or fewer than two values.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x <= 0.0 || var_y <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (var_x * var_y).sqrt())
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(preds: &[f64], labels: &[f64]) -> Option<f64> {
    pearson(&average_ranks(preds), &average_ranks(labels))
}

/// Cross-entropy over scores min-max normalized to the label range. Labels
/// are normalized as-is; predictions are normalized and then clamped to
/// [1e-7, 1 - 1e-7] so the logs stay finite.
pub fn cross_entropy(
    labels: &[f64],
    preds: &[f64],
    label_min: f64,
    label_max: f64,
) -> Result<f64, PredictError> {
    if labels.is_empty() {
        return Err(PredictError::Shape("cross entropy needs at least one pair".into()));
    }
    if labels.len() != preds.len() {
        return Err(PredictError::Shape(format!(
            "{} labels but {} predictions",
            labels.len(),
            preds.len()
        )));
    }
    let span = label_max - label_min;
    if !(span > 0.0) {
        return Err(PredictError::Shape(format!(
            "label range [{label_min}, {label_max}] is empty"
        )));
    }
    let mut total = 0.0;
    for (&y_raw, &p_raw) in labels.iter().zip(preds) {
        let y = (y_raw - label_min) / span;
        let p = ((p_raw - label_min) / span).clamp(1e-7, 1.0 - 1e-7);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / labels.len() as f64)
}

/// Aggregate accuracy of a prediction batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    /// Spearman rank correlation between predictions and labels.
    pub src: f64,
    /// Cross-entropy over range-normalized scores, when the range is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce: Option<f64>,
}

/// Scores records against their labels. Every record must carry a label;
/// SRC needs at least two records and non-constant ranks.
pub fn evaluate(
    records: &[PredictionRecord],
    label_range: Option<(f64, f64)>,
) -> Result<EvalReport, PredictError> {
    let mut labels = Vec::with_capacity(records.len());
    let mut preds = Vec::with_capacity(records.len());
    for record in records {
        let label = record.label.ok_or_else(|| {
            PredictError::Shape(format!("record for post {} has no label", record.post_id))
        })?;
        labels.push(label);
        preds.push(record.predicted);
    }
    if records.len() < 2 {
        return Err(PredictError::SrcUndefined(format!(
            "need at least 2 records, got {}",
            records.len()
        )));
    }
    let src = spearman(&preds, &labels).ok_or_else(|| {
        PredictError::SrcUndefined("predictions or labels have constant ranks".into())
    })?;
    let ce = match label_range {
        Some((lo, hi)) => Some(cross_entropy(&labels, &preds, lo, hi)?),
        None => None,
    };
    Ok(EvalReport {
        n: records.len(),
        mae: mae(&labels, &preds),
        mse: mse(&labels, &preds),
        src,
        ce,
    })
}
