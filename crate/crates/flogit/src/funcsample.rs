//! Discretely observed curves and their basis-coefficient representation.
//!
//! Raw curves live on a shared observation grid. `fit_coefficients` projects
//! each curve onto a B-spline basis by least squares (one QR factorization
//! shared across curves), `select_num_basis` picks the basis size by the
//! residual criterion φ²(M) = Σ_i ∫ [X_i − X̂_i]² dt / (n − M), and `center`
//! subtracts either the coefficient-wise mean or the L1-median (geometric
//! median) of the sample.

use nalgebra::{DMatrix, DVector};

use crate::bspline::BSplineBasis;
use crate::error::FlogitError;

/// Smallest candidate basis size in the φ² sweep.
const MIN_BASIS: usize = 4;
/// Largest candidate basis size in the φ² sweep.
const MAX_BASIS: usize = 40;
/// Plateau threshold for consecutive φ² values.
const PHI_SQ_PLATEAU: f64 = 1e-6;

/// Curves observed on a common strictly increasing grid; row i of `values`
/// is curve i.
#[derive(Debug, Clone)]
pub struct RawCurves {
    grid: Vec<f64>,
    values: DMatrix<f64>,
}

impl RawCurves {
    pub fn new(grid: Vec<f64>, values: DMatrix<f64>) -> Result<Self, FlogitError> {
        if grid.len() < 2 {
            return Err(FlogitError::InvalidArgument(
                "observation grid needs at least 2 points".into(),
            ));
        }
        if grid.iter().any(|t| !t.is_finite()) {
            return Err(FlogitError::InvalidArgument(
                "observation grid must be finite".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FlogitError::InvalidArgument(
                "observation grid must be strictly increasing".into(),
            ));
        }
        if values.ncols() != grid.len() {
            return Err(FlogitError::DimensionMismatch(format!(
                "{} columns of curve values vs {} grid points",
                values.ncols(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FlogitError::InvalidArgument(
                "curve values must be finite".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_rows(grid: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self, FlogitError> {
        let j = grid.len();
        if rows.iter().any(|r| r.len() != j) {
            return Err(FlogitError::DimensionMismatch(
                "ragged curve rows".into(),
            ));
        }
        let values = DMatrix::from_fn(rows.len(), j, |i, c| rows[i][c]);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }
}

/// How a sample was centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMode {
    Mean,
    L1Median,
}

/// A sample of curves expressed as basis coefficients: row i of `coefs`
/// expands X_i (minus the center, once centered).
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    basis: BSplineBasis,
    coefs: DMatrix<f64>,
    center: DVector<f64>,
    centered: Option<CenterMode>,
}

impl FunctionalSample {
    /// Assembles a sample from parts; used when reloading fitted models.
    pub fn from_parts(
        basis: BSplineBasis,
        coefs: DMatrix<f64>,
        center: DVector<f64>,
        centered: Option<CenterMode>,
    ) -> Result<Self, FlogitError> {
        let m = basis.num_functions();
        if coefs.ncols() != m || center.len() != m {
            return Err(FlogitError::DimensionMismatch(format!(
                "coefficients ({}) or center ({}) do not match {m} basis functions",
                coefs.ncols(),
                center.len()
            )));
        }
        Ok(Self {
            basis,
            coefs,
            center,
            centered,
        })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn coefs(&self) -> &DMatrix<f64> {
        &self.coefs
    }

    pub fn center_coefficients(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn centered_mode(&self) -> Option<CenterMode> {
        self.centered
    }

    pub fn n_curves(&self) -> usize {
        self.coefs.nrows()
    }

    /// Centers the sample, recording the subtracted function.
    ///
    /// `Mean` subtracts coefficient-wise column means. `L1Median` subtracts
    /// the minimizer of Σ_i ‖X_i − u‖ in the Φ-metric, found by Weiszfeld
    /// iteration on the Φ^{1/2}-transformed coefficients (where the Φ-norm
    /// is Euclidean), with the Vardi-Zhang correction when an iterate lands
    /// on a data point.
    pub fn center(&self, mode: CenterMode) -> Result<Self, FlogitError> {
        if self.centered.is_some() {
            return Err(FlogitError::InvalidArgument(
                "sample is already centered".into(),
            ));
        }
        let center = match mode {
            CenterMode::Mean => {
                DVector::from_fn(self.coefs.ncols(), |m, _| self.coefs.column(m).mean())
            }
            CenterMode::L1Median => self.l1_median()?,
        };
        let mut coefs = self.coefs.clone();
        for mut row in coefs.row_iter_mut() {
            row -= center.transpose();
        }
        Ok(Self {
            basis: self.basis.clone(),
            coefs,
            center,
            centered: Some(mode),
        })
    }

    /// Geometric median of the curves in basis coordinates.
    fn l1_median(&self) -> Result<DVector<f64>, FlogitError> {
        let n = self.coefs.nrows();
        let transformed = &self.coefs * self.basis.gram_sqrt();
        // Rows of `transformed` are the Φ^{1/2}-coordinates b_i.
        let mut u = DVector::from_fn(transformed.ncols(), |m, _| transformed.column(m).mean());
        let scale = transformed
            .row_iter()
            .map(|r| r.norm())
            .fold(1.0_f64, f64::max);
        let coincide_tol = 1e-12 * scale;

        let max_iter = 500;
        let mut converged = false;
        for _ in 0..max_iter {
            // Weiszfeld step over points away from u; coincident points enter
            // through the Vardi-Zhang damping below.
            let mut weight_sum = 0.0;
            let mut weighted = DVector::zeros(u.len());
            let mut resultant = DVector::zeros(u.len());
            let mut multiplicity = 0.0;
            for i in 0..n {
                let diff = transformed.row(i).transpose() - &u;
                let d = diff.norm();
                if d <= coincide_tol {
                    multiplicity += 1.0;
                    continue;
                }
                weight_sum += 1.0 / d;
                weighted += transformed.row(i).transpose() / d;
                resultant += diff / d;
            }
            if weight_sum == 0.0 {
                // Every curve coincides with u.
                converged = true;
                break;
            }
            let next = if multiplicity > 0.0 {
                let r = resultant.norm();
                if r <= multiplicity {
                    // u is the median: the pull of the other points does not
                    // exceed the mass sitting at u.
                    converged = true;
                    break;
                }
                let lambda = multiplicity / r;
                (weighted / weight_sum) * (1.0 - lambda) + &u * lambda
            } else {
                weighted / weight_sum
            };
            let step = (&next - &u).norm();
            u = next;
            if step <= 1e-10 * (1.0 + u.norm()) {
                converged = true;
                break;
            }
        }
        let result = self.basis.gram_inv_sqrt() * &u;
        if converged {
            Ok(result)
        } else {
            Err(FlogitError::NonConvergence {
                iterations: max_iter,
                context: "Weiszfeld iteration for the L1-median".into(),
                last_iterate: result.iter().copied().collect(),
            })
        }
    }
}

/// Least-squares basis coefficients for every curve, sharing one QR
/// factorization of the design matrix.
pub fn fit_coefficients(
    raw: &RawCurves,
    basis: &BSplineBasis,
) -> Result<FunctionalSample, FlogitError> {
    let j = raw.n_points();
    let m = basis.num_functions();
    if j < m + 1 {
        return Err(FlogitError::InvalidArgument(format!(
            "{j} grid points cannot support {m} basis functions with residual degrees of freedom"
        )));
    }
    let design = basis.eval(raw.grid())?;
    let qr = design.qr();
    let r = qr.r();
    let max_diag = (0..m).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    if (0..m).any(|i| r[(i, i)].abs() < 1e-10 * max_diag) || max_diag == 0.0 {
        return Err(FlogitError::SingularDesign(
            "basis design matrix is rank deficient on this grid".into(),
        ));
    }
    // A = (R^{-1} Qᵀ Yᵀ)ᵀ, one triangular solve per curve.
    let qt_y = qr.q().transpose() * raw.values().transpose();
    let coefs_t = r
        .solve_upper_triangular(&qt_y)
        .ok_or_else(|| FlogitError::SingularDesign("triangular solve failed".into()))?;
    FunctionalSample::from_parts(
        basis.clone(),
        coefs_t.transpose(),
        DVector::zeros(m),
        None,
    )
}

/// φ² profile over the candidate grid M = 4, …, min(40, ⌊J/4⌋); candidates
/// with n ≤ M are skipped.
pub fn basis_selection_profile(raw: &RawCurves) -> Result<Vec<(usize, f64)>, FlogitError> {
    let j = raw.n_points();
    let n = raw.n_curves();
    if j < 16 {
        return Err(FlogitError::InvalidArgument(format!(
            "basis selection needs at least 16 grid points, got {j}"
        )));
    }
    let hi = MAX_BASIS.min(j / 4);
    let mut profile = Vec::new();
    for m in MIN_BASIS..=hi {
        if n <= m {
            continue;
        }
        let basis = BSplineBasis::new(raw.domain(), m)?;
        let sample = fit_coefficients(raw, &basis)?;
        let fitted = sample.coefs() * basis.eval(raw.grid())?.transpose();
        let mut total = 0.0;
        for i in 0..n {
            let mut acc = 0.0;
            for c in 0..j - 1 {
                let r0 = raw.values()[(i, c)] - fitted[(i, c)];
                let r1 = raw.values()[(i, c + 1)] - fitted[(i, c + 1)];
                acc += 0.5 * (r0 * r0 + r1 * r1) * (raw.grid()[c + 1] - raw.grid()[c]);
            }
            total += acc;
        }
        profile.push((m, total / (n - m) as f64));
    }
    if profile.is_empty() {
        return Err(FlogitError::InvalidArgument(
            "no admissible basis sizes for this sample".into(),
        ));
    }
    Ok(profile)
}

/// Basis size chosen from the φ² profile: the first M whose φ² plateaus
/// against the next candidate (|φ²(M) − φ²(M+1)| < 1e-6), falling back to
/// the argmin over the grid.
pub fn select_num_basis(raw: &RawCurves) -> Result<usize, FlogitError> {
    let profile = basis_selection_profile(raw)?;
    for w in profile.windows(2) {
        let ((m0, p0), (m1, p1)) = (w[0], w[1]);
        if m1 == m0 + 1 && (p0 - p1).abs() < PHI_SQ_PLATEAU {
            return Ok(m0);
        }
    }
    let best = profile
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty profile");
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_grid(j: usize) -> Vec<f64> {
        (0..j).map(|i| i as f64 / (j - 1) as f64).collect()
    }

    #[test]
    fn raw_curves_validation() {
        assert!(RawCurves::new(vec![0.0, 0.0, 1.0], DMatrix::zeros(1, 3)).is_err());
        assert!(RawCurves::new(vec![0.0, 1.0], DMatrix::zeros(1, 3)).is_err());
        assert!(RawCurves::new(vec![0.0, f64::INFINITY], DMatrix::zeros(1, 2)).is_err());
        let bad = DMatrix::from_element(1, 2, f64::NAN);
        assert!(RawCurves::new(vec![0.0, 1.0], bad).is_err());
        assert!(RawCurves::from_rows(vec![0.0, 0.5, 1.0], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn single_basis_function_recovers_unit_vector() {
        let grid = unit_grid(61);
        let basis = BSplineBasis::new((0.0, 1.0), 7).unwrap();
        let design = basis.eval(&grid).unwrap();
        for f in [0usize, 3, 6] {
            let values = DMatrix::from_fn(1, grid.len(), |_, c| design[(c, f)]);
            let raw = RawCurves::new(grid.clone(), values).unwrap();
            let sample = fit_coefficients(&raw, &basis).unwrap();
            for m in 0..7 {
                let expected = if m == f { 1.0 } else { 0.0 };
                assert!(
                    (sample.coefs()[(0, m)] - expected).abs() < 1e-8,
                    "φ_{f}: coefficient {m} = {}",
                    sample.coefs()[(0, m)]
                );
            }
        }
    }

    #[test]
    fn constant_curve_gets_unit_coefficients() {
        let grid = unit_grid(41);
        let basis = BSplineBasis::new((0.0, 1.0), 6).unwrap();
        let raw = RawCurves::new(grid.clone(), DMatrix::from_element(1, 41, 1.0)).unwrap();
        let sample = fit_coefficients(&raw, &basis).unwrap();
        for m in 0..6 {
            assert_relative_eq!(sample.coefs()[(0, m)], 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn too_few_points_is_invalid() {
        let grid = unit_grid(6);
        let basis = BSplineBasis::new((0.0, 1.0), 6).unwrap();
        let raw = RawCurves::new(grid, DMatrix::zeros(2, 6)).unwrap();
        assert!(matches!(
            fit_coefficients(&raw, &basis),
            Err(FlogitError::InvalidArgument(_))
        ));
    }

    #[test]
    fn mean_centering_zeroes_column_means() {
        let grid = unit_grid(31);
        let basis = BSplineBasis::new((0.0, 1.0), 5).unwrap();
        let values = DMatrix::from_fn(8, 31, |i, c| {
            (i as f64 + 1.0) * (3.0 * grid[c]).sin() + i as f64
        });
        let raw = RawCurves::new(grid, values).unwrap();
        let sample = fit_coefficients(&raw, &basis).unwrap();
        let centered = sample.center(CenterMode::Mean).unwrap();
        for m in 0..5 {
            assert!(centered.coefs().column(m).mean().abs() < 1e-10);
        }
        assert!(centered.center(CenterMode::Mean).is_err());
    }

    #[test]
    fn symmetric_sample_centers_on_the_middle_curve_in_both_modes() {
        let grid = unit_grid(41);
        let basis = BSplineBasis::new((0.0, 1.0), 6).unwrap();
        // Pairs c ± d for a few d's.
        let c_curve: Vec<f64> = grid.iter().map(|t| (2.0 * t).cos()).collect();
        let mut rows = Vec::new();
        for k in 1..=3 {
            let d: Vec<f64> = grid.iter().map(|t| k as f64 * (5.0 * t).sin()).collect();
            rows.push(c_curve.iter().zip(&d).map(|(c, d)| c + d).collect::<Vec<_>>());
            rows.push(c_curve.iter().zip(&d).map(|(c, d)| c - d).collect::<Vec<_>>());
        }
        let raw = RawCurves::from_rows(grid.clone(), &rows).unwrap();
        let sample = fit_coefficients(&raw, &basis).unwrap();
        let c_raw = RawCurves::from_rows(grid, &[c_curve]).unwrap();
        let c_coefs = fit_coefficients(&c_raw, &basis).unwrap().coefs().row(0).transpose();

        for mode in [CenterMode::Mean, CenterMode::L1Median] {
            let centered = sample.center(mode).unwrap();
            let err = (centered.center_coefficients() - &c_coefs).norm();
            assert!(err < 1e-8, "{mode:?}: center off by {err}");
        }
    }

    #[test]
    fn single_curve_is_its_own_center() {
        let grid = unit_grid(25);
        let basis = BSplineBasis::new((0.0, 1.0), 5).unwrap();
        let values = DMatrix::from_fn(1, 25, |_, c| grid[c] * grid[c] + 0.5);
        let raw = RawCurves::new(grid, values).unwrap();
        let sample = fit_coefficients(&raw, &basis).unwrap();
        let expected = sample.coefs().row(0).transpose();
        for mode in [CenterMode::Mean, CenterMode::L1Median] {
            let centered = sample.center(mode).unwrap();
            assert!((centered.center_coefficients() - &expected).norm() < 1e-10);
            assert!(centered.coefs().norm() < 1e-10);
        }
    }
}
