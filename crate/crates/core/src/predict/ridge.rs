//! Closed-form ridge regression over standardized features: a reproducible
//! numeric stand-in for a learned popularity model.

use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::runtime::{PropagationFeatures, UgcPost};

/// Column order of [`popularity_features`].
pub const FEATURE_NAMES: [&str; 9] = [
    "final_mean_opinion",
    "opinion_slope",
    "share_above_7_5",
    "actions_post",
    "actions_retweet",
    "actions_reply",
    "actions_like",
    "actions_idle",
    "text_chars",
];

/// Feature row for one simulated post, in [`FEATURE_NAMES`] order.
pub fn popularity_features(post: &UgcPost, features: &PropagationFeatures) -> Vec<f64> {
    let series = &features.m_num_series;
    let final_m = series.last().copied().unwrap_or(0.0);
    let slope = if series.len() >= 2 {
        (series[series.len() - 1] - series[0]) / (series.len() - 1) as f64
    } else {
        0.0
    };
    let h = &features.action_histogram;
    vec![
        final_m,
        slope,
        features.share_above_7_5,
        h.post as f64,
        h.retweet as f64,
        h.reply as f64,
        h.like as f64,
        h.do_nothing as f64,
        post.text.chars().count() as f64,
    ]
}

/// Fitted model. Coefficients live in standardized feature space; raw rows
/// are mapped through the stored means and stds at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict_numeric(&self, row: &[f64]) -> f64 {
        assert_eq!(row.len(), self.coef.len(), "feature width mismatch");
        let mut y = self.intercept;
        for j in 0..row.len() {
            y += self.coef[j] * (row[j] - self.means[j]) / self.stds[j];
        }
        y
    }
}

/// Solves A x = b for symmetric positive definite A via Cholesky. A is in
/// row-major order and is consumed as scratch space.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>, p: usize) -> Result<Vec<f64>, PredictError> {
    // Pivot tolerance scales with the diagonal, which is n + lambda for
    // standardized columns.
    let tol = 1e-9 * a.iter().step_by(p + 1).fold(1.0f64, |m, d| m.max(d.abs()));
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if d <= tol {
            return Err(PredictError::Singular);
        }
        let root = d.sqrt();
        a[j * p + j] = root;
        for i in (j + 1)..p {
            let mut v = a[i * p + j];
            for k in 0..j {
                v -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = v / root;
        }
    }
    // Forward substitution L t = b, then back substitution L^T x = t.
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * p + k] * b[k];
        }
        b[i] = v / a[i * p + i];
    }
    for i in (0..p).rev() {
        let mut v = b[i];
        for k in (i + 1)..p {
            v -= a[k * p + i] * b[k];
        }
        b[i] = v / a[i * p + i];
    }
    Ok(b)
}

/// Fits ridge regression with an unpenalized intercept: columns are
/// standardized on the training statistics, targets centered, and the
/// normal equations (Z'Z + lambda I) w = Z'y solved in closed form.
/// Constant columns get std 1 so they contribute nothing; with lambda = 0
/// they make the system singular, which is reported rather than patched.
pub fn ridge_fit(
    rows: &[Vec<f64>],
    targets: &[f64],
    lambda: f64,
) -> Result<RidgeModel, PredictError> {
    if rows.len() < 2 {
        return Err(PredictError::Shape(format!(
            "ridge fit needs at least 2 training rows, got {}",
            rows.len()
        )));
    }
    if targets.len() != rows.len() {
        return Err(PredictError::Shape(format!(
            "{} rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(PredictError::Shape("feature rows are empty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(PredictError::Shape(format!(
                "row {i} has width {}, expected {p}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(PredictError::Shape(format!("row {i} has a non-finite feature")));
        }
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(PredictError::Shape("targets must be finite".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(PredictError::Shape(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }

    let n = rows.len() as f64;
    let mut means = vec![0.0; p];
    for row in rows {
        for j in 0..p {
            means[j] += row[j];
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; p];
    for row in rows {
        for j in 0..p {
            stds[j] += (row[j] - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| (0..p).map(|j| (row[j] - means[j]) / stds[j]).collect())
        .collect();
    let intercept = targets.iter().sum::<f64>() / n;
    let centered: Vec<f64> = targets.iter().map(|y| y - intercept).collect();

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for (row, &y) in z.iter().zip(&centered) {
        for j in 0..p {
            rhs[j] += row[j] * y;
            for k in 0..=j {
                gram[j * p + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[k * p + j] = gram[j * p + k];
        }
        gram[j * p + j] += lambda;
    }

    let coef = cholesky_solve(gram, rhs, p)?;
    Ok(RidgeModel { means, stds, coef, intercept })
}
