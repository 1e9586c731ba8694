//! Evaluation metrics for the simulation study: integrated squared error
//! between coefficient functions, the area under the ROC curve, and
//! median/MAD aggregation of per-run results.

use nalgebra::DVector;

use crate::bspline::BSplineBasis;
use crate::error::FlogitError;
use crate::robust_scale::{mad_about, median};

/// Default quadrature grid for the integrated squared error.
pub const DEFAULT_IMSE_GRID: usize = 1001;

/// ∫ (β(t) − β̂(t))² dt over the basis domain by the trapezoid rule on an
/// equally spaced grid of `grid_points` points.
pub fn imse<F: Fn(f64) -> f64>(
    beta_true: F,
    beta_hat_coefs: &DVector<f64>,
    basis: &BSplineBasis,
    grid_points: usize,
) -> Result<f64, FlogitError> {
    if grid_points < 101 {
        return Err(FlogitError::InvalidArgument(format!(
            "imse needs at least 101 quadrature points, got {grid_points}"
        )));
    }
    if beta_hat_coefs.len() != basis.num_functions() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} coefficients vs {} basis functions",
            beta_hat_coefs.len(),
            basis.num_functions()
        )));
    }
    let (a, b) = basis.domain();
    let h = (b - a) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points)
        .map(|j| a + h * j as f64)
        .collect();
    let hat = basis.eval(&grid)? * beta_hat_coefs;
    let mut total = 0.0;
    for (j, &t) in grid.iter().enumerate() {
        let r = beta_true(t) - hat[j];
        let w = if j == 0 || j == grid_points - 1 {
            0.5
        } else {
            1.0
        };
        total += w * r * r;
    }
    Ok(total * h)
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// (#{p_i > p_j} + ½ #{p_i = p_j}) / (n₁ n₀) over positive/negative pairs,
/// computed in O(n log n) from midranks. Midranks and their sums are exact
/// multiples of ½ in f64, so the result equals the pair count bit for bit.
pub fn auc(probs: &[f64], y: &[u8]) -> Result<f64, FlogitError> {
    if probs.len() != y.len() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(FlogitError::InvalidArgument(
            "labels must be 0 or 1".into(),
        ));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(FlogitError::InvalidArgument(
            "probabilities must be finite".into(),
        ));
    }
    let n = probs.len();
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(FlogitError::InvalidArgument(
            "AUC needs both classes present".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && probs[idx[j]] == probs[idx[i]] {
            j += 1;
        }
        // Midrank of the tie group spanning 1-based ranks i+1 ..= j.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if y[k] == 1 {
                rank_sum += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// Sample median and raw median absolute deviation (no consistency factor).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64), FlogitError> {
    if values.is_empty() {
        return Err(FlogitError::InvalidArgument(
            "cannot aggregate an empty vector".into(),
        ));
    }
    let med = median(values);
    Ok((med, mad_about(values, med)))
}

/// Per-run results of one (method, contamination level) Monte-Carlo cell.
#[derive(Debug, Clone)]
pub struct McResult {
    pub method: String,
    pub imse_runs: Vec<f64>,
    pub auc_runs: Vec<f64>,
    /// Wall-clock seconds per fit, in run order.
    pub fit_seconds: Vec<f64>,
    pub median_imse: f64,
    pub mad_imse: f64,
    pub median_auc: f64,
    pub mad_auc: f64,
}

impl McResult {
    pub fn new(
        method: impl Into<String>,
        imse_runs: Vec<f64>,
        auc_runs: Vec<f64>,
        fit_seconds: Vec<f64>,
    ) -> Result<Self, FlogitError> {
        let (median_imse, mad_imse) = aggregate(&imse_runs)?;
        let (median_auc, mad_auc) = aggregate(&auc_runs)?;
        Ok(Self {
            method: method.into(),
            imse_runs,
            auc_runs,
            fit_seconds,
            median_imse,
            mad_imse,
            median_auc,
            mad_auc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> BSplineBasis {
        BSplineBasis::new((0.0, 1.0), 8).unwrap()
    }

    #[test]
    fn imse_vanishes_when_the_estimate_is_the_truth() {
        let basis = basis();
        let coefs = DVector::from_fn(8, |i, _| 0.3 * i as f64 - 1.0);
        let truth = {
            let basis = basis.clone();
            let coefs = coefs.clone();
            move |t: f64| (basis.eval(&[t]).unwrap() * &coefs)[0]
        };
        let v = imse(truth, &coefs, &basis, 1001).unwrap();
        assert!(v.abs() < 1e-12, "got {v}");
    }

    #[test]
    fn imse_of_a_zero_estimate_integrates_the_truth() {
        let basis = basis();
        let zero = DVector::zeros(8);
        let v = imse(
            |t| (std::f64::consts::PI * t).sin(),
            &zero,
            &basis,
            DEFAULT_IMSE_GRID,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn imse_rejects_coarse_grids() {
        let basis = basis();
        let zero = DVector::zeros(8);
        assert!(matches!(
            imse(|_| 0.0, &zero, &basis, 100),
            Err(FlogitError::InvalidArgument(_))
        ));
        assert!(imse(|_| 0.0, &zero, &basis, 101).is_ok());
    }

    #[test]
    fn auc_handles_the_textbook_cases() {
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 0.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &y).unwrap(), 0.5);
        // One crossing pair out of four.
        assert_eq!(auc(&[0.1, 0.8, 0.2, 0.9], &y).unwrap(), 0.75);
    }

    #[test]
    fn auc_rejects_degenerate_inputs() {
        assert!(matches!(
            auc(&[0.1, 0.9], &[1, 1]),
            Err(FlogitError::InvalidArgument(_))
        ));
        assert!(matches!(
            auc(&[0.1, 0.9], &[0, 2]),
            Err(FlogitError::InvalidArgument(_))
        ));
        assert!(matches!(
            auc(&[0.1, f64::NAN], &[0, 1]),
            Err(FlogitError::InvalidArgument(_))
        ));
        assert!(matches!(
            auc(&[0.1], &[0, 1]),
            Err(FlogitError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn aggregate_matches_hand_values() {
        assert_eq!(aggregate(&[1.0, 2.0, 3.0]).unwrap(), (2.0, 1.0));
        assert_eq!(aggregate(&[4.2, 4.2, 4.2, 4.2]).unwrap(), (4.2, 0.0));
        assert!(matches!(
            aggregate(&[]),
            Err(FlogitError::InvalidArgument(_))
        ));
    }

    #[test]
    fn mc_result_aggregates_lie_inside_the_run_range() {
        let imse_runs = vec![0.3, 0.1, 0.7, 0.2, 0.4];
        let auc_runs = vec![0.9, 0.84, 0.86, 0.88, 0.81];
        let r = McResult::new("rfpca-wby", imse_runs.clone(), auc_runs.clone(), vec![]).unwrap();
        let inside = |m: f64, v: &[f64]| {
            v.iter().cloned().fold(f64::INFINITY, f64::min) <= m
                && m <= v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(inside(r.median_imse, &imse_runs));
        assert!(inside(r.median_auc, &auc_runs));
        assert!(r.mad_imse >= 0.0 && r.mad_auc >= 0.0);
    }
}
