//! Naive reference metrics: O(n^2) ranking, textbook formulas, no reuse of
//! the main crate's code.

/// Mean absolute error.
pub fn mae(preds: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(preds.len(), labels.len());
    assert!(!preds.is_empty());
    let total: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum();
    total / preds.len() as f64
}

/// Mean squared error.
pub fn mse(preds: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(preds.len(), labels.len());
    assert!(!preds.is_empty());
    let total: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    total / preds.len() as f64
}

/// Ranks with ties averaged: rank(x) = 1 + #less + (#equal - 1) / 2.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count();
            let equal = xs.iter().filter(|&&y| y == x).count();
            1.0 + less as f64 + (equal as f64 - 1.0) / 2.0
        })
        .collect()
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Spearman rank correlation: Pearson over average ranks. NaN when either
/// side is constant.
pub fn spearman(preds: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(preds.len(), labels.len());
    pearson(&average_ranks(preds), &average_ranks(labels))
}

/// Binary cross entropy after min-max normalization. Labels are normalized
/// but left unclamped; predictions are normalized then clamped away from
/// {0, 1} so the logs stay finite.
pub fn cross_entropy(labels: &[f64], preds: &[f64], min: f64, max: f64) -> f64 {
    assert_eq!(labels.len(), preds.len());
    assert!(!labels.is_empty());
    let span = max - min;
    let mut total = 0.0;
    for (&y_raw, &p_raw) in labels.iter().zip(preds) {
        let y = (y_raw - min) / span;
        let p = ((p_raw - min) / span).clamp(1e-7, 1.0 - 1e-7);
        total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    -total / labels.len() as f64
}
