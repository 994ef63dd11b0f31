//! Evaluation metrics for sparse recovery: standardized estimation error,
//! test RMSE, and post-threshold support recovery.

use anyhow::{bail, Result};
use hadamard_sparse::linalg;
use hadamard_sparse::objectives::Dataset;

/// Metric record for one fitted coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `||b_hat - b*||^2 / ||b*||^2`; `None` when `b* = 0`.
    pub est_err: Option<f64>,
    /// `sqrt((1/n) ||y - y_hat||^2)` on the test split.
    pub rmse: f64,
    /// `(TP + TN) / d` with the support taken post-threshold.
    pub support_accuracy: f64,
    /// Entries selected although truly zero.
    pub false_positives: usize,
}

/// Compute all metrics; `beta_hat` is assumed already thresholded.
pub fn metrics(beta_hat: &[f64], beta_star: &[f64], test: &Dataset) -> Result<Metrics> {
    if beta_hat.len() != beta_star.len() || beta_hat.len() != test.x.cols() {
        bail!(
            "shape mismatch: beta_hat {}, beta_star {}, test dimension {}",
            beta_hat.len(),
            beta_star.len(),
            test.x.cols()
        );
    }
    let star_norm_sq = linalg::norm_sq(beta_star);
    let est_err = if star_norm_sq == 0.0 {
        None
    } else {
        let diff_sq: f64 = beta_hat
            .iter()
            .zip(beta_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Some(diff_sq / star_norm_sq)
    };

    let y = test.values()?;
    let pred = test.x.matvec(beta_hat);
    let sq: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let rmse = (sq / test.len() as f64).sqrt();

    let mut correct = 0usize;
    let mut false_positives = 0usize;
    for (&hat, &star) in beta_hat.iter().zip(beta_star) {
        let selected = hat != 0.0;
        let informative = star != 0.0;
        if selected == informative {
            correct += 1;
        }
        if selected && !informative {
            false_positives += 1;
        }
    }
    Ok(Metrics {
        est_err,
        rmse,
        support_accuracy: correct as f64 / beta_hat.len() as f64,
        false_positives,
    })
}
