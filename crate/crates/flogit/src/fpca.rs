//! Functional principal components in a B-spline basis.
//!
//! Both methods work on the Φ^{1/2}-transformed coefficient matrix, where
//! the function-space inner product is plain Euclidean. The classical path
//! eigen-decomposes the coefficient covariance; the robust path hunts
//! directions maximizing an M-scale of the projections by projection
//! pursuit over the data directions themselves, refined by seeded
//! two-plane rotations, deflating after each component.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bspline::BSplineBasis;
use crate::error::FlogitError;
use crate::funcsample::{CenterMode, FunctionalSample};
use crate::robust_scale::{median, mscale, MScaleConfig};

/// Fraction-of-variance cutoff used when callers have no opinion.
pub const DEFAULT_VAR_THRESHOLD: f64 = 0.99;
/// Default number of pursuit refinement rounds.
pub const DEFAULT_REFINE_ROUNDS: usize = 20;

/// How many of the best-scoring candidates seed the rotation refinement.
const REFINE_POOL: usize = 8;
/// Random candidate mixtures tried per refinement round.
const REFINE_MIXTURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpcaMethod {
    Classical,
    Robust,
}

/// An eigen system extracted from a centered sample: directions are rows of
/// basis coefficients, Φ-orthonormal; `scores[(i, k)]` is ⟨X_i − μ, ψ̂_k⟩;
/// `explained[k]` is the cumulative variance fraction through component k;
/// `center` keeps the training center so new data can be aligned at
/// prediction time.
#[derive(Debug, Clone)]
pub struct RobustEigenSystem {
    pub basis: BSplineBasis,
    pub directions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub scores: DMatrix<f64>,
    pub method: FpcaMethod,
    pub explained: Vec<f64>,
    pub center: DVector<f64>,
}

impl RobustEigenSystem {
    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn check_threshold(var_threshold: f64) -> Result<(), FlogitError> {
    if !(var_threshold > 0.0 && var_threshold <= 1.0) {
        return Err(FlogitError::InvalidArgument(format!(
            "variance threshold {var_threshold} outside (0, 1]"
        )));
    }
    Ok(())
}

fn require_centered(
    sample: &FunctionalSample,
    mode: CenterMode,
    what: &str,
) -> Result<(), FlogitError> {
    if sample.centered_mode() != Some(mode) {
        return Err(FlogitError::InvalidArgument(format!(
            "{what} requires a sample centered with {mode:?}"
        )));
    }
    if sample.n_curves() < 2 {
        return Err(FlogitError::InvalidArgument(
            "need at least 2 curves".into(),
        ));
    }
    Ok(())
}

/// Flips the direction (and anything riding along) so its largest-magnitude
/// basis coefficient is positive; first index wins ties.
fn sign_flip_needed(psi: &DVector<f64>) -> bool {
    let mut best = 0usize;
    let mut best_abs = psi[0].abs();
    for m in 1..psi.len() {
        if psi[m].abs() > best_abs {
            best_abs = psi[m].abs();
            best = m;
        }
    }
    psi[best] < 0.0
}

/// Classical FPCA: eigen-decomposition of the transformed coefficient
/// covariance (1/(n−1)) Φ^{1/2} Aᵀ A Φ^{1/2}. The sample must be
/// mean-centered. Directions use the same sign convention as the robust
/// method so runs are reproducible.
pub fn fpca_classical(
    sample: &FunctionalSample,
    var_threshold: f64,
) -> Result<RobustEigenSystem, FlogitError> {
    check_threshold(var_threshold)?;
    require_centered(sample, CenterMode::Mean, "classical FPCA")?;
    let basis = sample.basis();
    let n = sample.n_curves();
    let m = basis.num_functions();

    let b = sample.coefs() * basis.gram_sqrt();
    let cov = b.transpose() * &b / (n - 1) as f64;
    let eigen = cov.symmetric_eigen();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| eigen.eigenvalues[c].total_cmp(&eigen.eigenvalues[a]));
    let lambdas: Vec<f64> = order
        .iter()
        .map(|&i| eigen.eigenvalues[i].max(0.0))
        .collect();
    let total: f64 = lambdas.iter().sum();
    if total <= 0.0 {
        return Err(FlogitError::DegenerateScores(
            "sample has no variance".into(),
        ));
    }
    // Numerical rank: don't let a threshold of 1.0 drag in noise components.
    let rank = lambdas
        .iter()
        .take_while(|&&l| l > lambdas[0] * 1e-12)
        .count()
        .max(1);
    let mut k = rank;
    let mut cum = 0.0;
    for (idx, l) in lambdas.iter().take(rank).enumerate() {
        cum += l;
        if cum / total >= var_threshold {
            k = idx + 1;
            break;
        }
    }

    let mut directions = DMatrix::zeros(k, m);
    let mut vectors = DMatrix::zeros(m, k);
    for (col, &src) in order.iter().take(k).enumerate() {
        let mut v = eigen.eigenvectors.column(src).into_owned();
        let mut psi = basis.gram_inv_sqrt() * &v;
        if sign_flip_needed(&psi) {
            v = -v;
            psi = -psi;
        }
        directions.row_mut(col).copy_from(&psi.transpose());
        vectors.column_mut(col).copy_from(&v);
    }
    let scores = &b * &vectors;

    let mut explained = Vec::with_capacity(k);
    let mut cum = 0.0;
    for l in lambdas.iter().take(k) {
        cum += l;
        explained.push(cum / total);
    }
    Ok(RobustEigenSystem {
        basis: basis.clone(),
        directions,
        eigenvalues: lambdas[..k].to_vec(),
        scores,
        method: FpcaMethod::Classical,
        explained,
        center: sample.center_coefficients().clone(),
    })
}

/// Projections of the transformed curves (columns of `bt`) onto `u`.
fn project(bt: &DMatrix<f64>, u: &DVector<f64>) -> Vec<f64> {
    (0..bt.ncols()).map(|i| bt.column(i).dot(u)).collect()
}

/// M-scale of the projections onto `u`, located at their median.
fn direction_scale(
    bt: &DMatrix<f64>,
    u: &DVector<f64>,
    cfg: &MScaleConfig,
) -> Result<f64, FlogitError> {
    let proj = project(bt, u);
    let med = median(&proj);
    mscale(&proj, med, cfg)
}

/// Robust FPCA by projection pursuit. The sample must be L1-median
/// centered. Candidates are the (deflated, normalized) data directions; the
/// winner is polished by `n_refine` rounds of two-plane rotations toward the
/// strongest other candidates and seeded random mixtures of them, with the
/// rotation angle halved each round and only improvements accepted.
/// λ̂_k = s_n², and components are extracted until K_max = min(M, n−1) or
/// the deflated data degenerate, whichever comes first.
pub fn fpca_robust(
    sample: &FunctionalSample,
    cfg: &MScaleConfig,
    var_threshold: f64,
    n_refine: usize,
) -> Result<RobustEigenSystem, FlogitError> {
    check_threshold(var_threshold)?;
    require_centered(sample, CenterMode::L1Median, "robust FPCA")?;
    let basis = sample.basis();
    let n = sample.n_curves();
    let m = basis.num_functions();
    let k_max = m.min(n - 1);

    let bt0 = basis.gram_sqrt() * sample.coefs().transpose();
    let mut bt = bt0.clone();
    let data_scale = (0..n)
        .map(|i| bt0.column(i).norm())
        .fold(0.0_f64, f64::max);
    let degenerate = 1e-12 * data_scale.max(f64::MIN_POSITIVE);

    let mut axes: Vec<DVector<f64>> = Vec::new();
    let mut lambdas: Vec<f64> = Vec::new();

    for k in 0..k_max {
        // Candidate directions: every surviving data column, normalized.
        let evaluated: Vec<Option<(f64, DVector<f64>)>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let nrm = bt.column(j).norm();
                if nrm <= degenerate {
                    return Ok(None);
                }
                let u = bt.column(j) / nrm;
                let s = direction_scale(&bt, &u, cfg)?;
                Ok(Some((s, u)))
            })
            .collect::<Result<_, FlogitError>>()?;

        let mut ranked: Vec<&(f64, DVector<f64>)> =
            evaluated.iter().flatten().collect();
        if ranked.is_empty() {
            break;
        }
        // Stable by construction: sort_by on (descending s, original order).
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        if ranked[0].0 <= 0.0 {
            break;
        }
        let mut best_s = ranked[0].0;
        let mut u = ranked[0].1.clone();
        let pool: Vec<&DVector<f64>> = ranked
            .iter()
            .skip(1)
            .take(REFINE_POOL)
            .map(|c| &c.1)
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(0xF9CA);
        rng.set_stream(k as u64);
        let mut angle = std::f64::consts::FRAC_PI_4;
        for _ in 0..n_refine {
            let mut trials: Vec<DVector<f64>> = pool.iter().map(|&v| v.clone()).collect();
            for _ in 0..REFINE_MIXTURES {
                if pool.is_empty() {
                    break;
                }
                let mut mix = DVector::zeros(m);
                for v in &pool {
                    mix += *v * rng.random_range(-1.0..1.0);
                }
                if mix.norm() > 1e-12 {
                    trials.push(mix.normalize());
                }
            }
            for v in trials {
                let w = &v - &u * u.dot(&v);
                let w_norm = w.norm();
                if w_norm <= 1e-12 {
                    continue;
                }
                let w = w / w_norm;
                for theta in [angle, -angle] {
                    let trial = (&u * theta.cos() + &w * theta.sin()).normalize();
                    let s = direction_scale(&bt, &trial, cfg)?;
                    if s > best_s {
                        best_s = s;
                        u = trial;
                    }
                }
            }
            angle *= 0.5;
        }

        if sign_flip_needed(&(basis.gram_inv_sqrt() * &u)) {
            u = -u;
        }
        // Deflate: remove the found direction from every column.
        for mut col in bt.column_iter_mut() {
            let c = u.dot(&col);
            col -= &u * c;
        }
        axes.push(u);
        lambdas.push(best_s * best_s);
    }

    let total: f64 = lambdas.iter().sum();
    if axes.is_empty() || total <= 0.0 {
        return Err(FlogitError::DegenerateScores(
            "no direction with positive scale".into(),
        ));
    }
    let mut k = axes.len();
    let mut cum = 0.0;
    for (idx, l) in lambdas.iter().enumerate() {
        cum += l;
        if cum / total >= var_threshold {
            k = idx + 1;
            break;
        }
    }

    let mut directions = DMatrix::zeros(k, m);
    let mut scores = DMatrix::zeros(n, k);
    for (row, u) in axes.iter().take(k).enumerate() {
        let psi = basis.gram_inv_sqrt() * u;
        directions.row_mut(row).copy_from(&psi.transpose());
        for i in 0..n {
            scores[(i, row)] = bt0.column(i).dot(u);
        }
    }
    let mut explained = Vec::with_capacity(k);
    let mut cum = 0.0;
    for l in lambdas.iter().take(k) {
        cum += l;
        explained.push(cum / total);
    }
    Ok(RobustEigenSystem {
        basis: basis.clone(),
        directions,
        eigenvalues: lambdas[..k].to_vec(),
        scores,
        method: FpcaMethod::Robust,
        explained,
        center: sample.center_coefficients().clone(),
    })
}
