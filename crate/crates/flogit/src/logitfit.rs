//! Logistic regression on principal-component scores: maximum likelihood and
//! a weighted robust M-estimator that bounds the influence of badly fitted
//! observations through ρ₂ applied to deviance residuals, plus the bias
//! correction that restores Fisher consistency.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::FlogitError;
use crate::fpca::{FpcaMethod, RobustEigenSystem};
use crate::robust_scale::{rho2, rho2_prime};

/// Logistic link F(u) = 1/(1+e^{-u}), stable across the full double range:
/// the exponential is always taken of a non-positive number.
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^u) without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Deviance component d(κ; y) = −y ln F(κ) − (1−y) ln(1−F(κ)), computed in
/// softplus form.
pub fn deviance(kappa: f64, y: u8) -> f64 {
    if y == 1 {
        softplus(-kappa)
    } else {
        softplus(kappa)
    }
}

/// ∂d/∂κ = F(κ) − y.
fn deviance_prime(kappa: f64, y: u8) -> f64 {
    logistic(kappa) - f64::from(y)
}

/// D(u) = ∫₀ᵘ ρ₂′(−ln s) ds in closed form.
///
/// Below the kink (u ≤ e^{−c}) the substitution s = e^{−x²} turns the
/// integral into a Gaussian tail: with a = √(−ln u),
/// D(u) = e^{1/4} [ e^{−(a+1/2)²} − (√π/2)·erfc(a + 1/2) ].
/// Past the kink ρ₂′ is the constant e^{−√c}, so D grows linearly.
pub fn d_integral(u: f64, c: f64) -> f64 {
    assert!(c > 0.0, "loss cutoff must be positive");
    assert!((0.0..=1.0).contains(&u), "D is defined on [0,1], got {u}");
    let kink = (-c).exp();
    let below = |v: f64| -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        let a = (-v.ln()).sqrt();
        let w = a + 0.5;
        0.25_f64.exp() * ((-w * w).exp() - 0.5 * std::f64::consts::PI.sqrt() * erfc(w))
    };
    if u <= kink {
        below(u)
    } else {
        below(kink) + (u - kink) * (-c.sqrt()).exp()
    }
}

/// Bias correction C(κ) = D[F(κ)] + D[1−F(κ)] + D(1); even in κ.
pub fn bias_correction(kappa: f64, c: f64) -> f64 {
    let f = logistic(kappa);
    d_integral(f, c) + d_integral(1.0 - f, c) + d_integral(1.0, c)
}

/// C′(κ) = F′(κ) [ρ₂′(−ln F(κ)) − ρ₂′(−ln(1−F(κ)))].
fn bias_correction_prime(kappa: f64, c: f64) -> f64 {
    let f = logistic(kappa);
    let fp = f * (1.0 - f);
    // −ln F ≥ 0 always; guard the log against F rounding to 0 or 1.
    let lf = -(f.max(f64::MIN_POSITIVE).ln());
    let lg = -((1.0 - f).max(f64::MIN_POSITIVE).ln());
    fp * (rho2_prime(lf, c) - rho2_prime(lg, c))
}

/// Per-observation pieces of the robust objective at score κ = zᵀθ.
#[derive(Debug, Clone, Copy)]
pub struct DevianceParts {
    pub kappa: f64,
    pub deviance: f64,
    pub correction: f64,
}

impl DevianceParts {
    pub fn at(kappa: f64, y: u8, c: f64) -> Self {
        Self {
            kappa,
            deviance: deviance(kappa, y),
            correction: bias_correction(kappa, c),
        }
    }
}

/// Loss applied to the deviance component. The bounded branch is the working
/// estimator; `Identity` turns the objective into plain ML (its D(u) = u
/// makes the correction a constant) and exists as a reduction check.
#[derive(Debug, Clone, Copy)]
pub enum DevianceLoss {
    Bounded { c: f64 },
    Identity,
}

impl DevianceLoss {
    fn rho(&self, d: f64) -> f64 {
        match self {
            Self::Bounded { c } => rho2(d, *c).expect("deviance is nonnegative"),
            Self::Identity => d,
        }
    }

    fn rho_prime(&self, d: f64) -> f64 {
        match self {
            Self::Bounded { c } => rho2_prime(d, *c),
            Self::Identity => 1.0,
        }
    }

    fn correction(&self, kappa: f64) -> f64 {
        match self {
            Self::Bounded { c } => bias_correction(kappa, *c),
            // D(u) = u gives C(κ) = F + (1−F) + 1 = 2 for every κ.
            Self::Identity => 2.0,
        }
    }

    fn correction_prime(&self, kappa: f64) -> f64 {
        match self {
            Self::Bounded { c } => bias_correction_prime(kappa, *c),
            Self::Identity => 0.0,
        }
    }
}

/// Hard 0/1 leverage weights from a coordinatewise robust Mahalanobis
/// distance in score space: RMD_i² = Σ_k ((ξ_ik − median_k)/s_k)² with
/// s_k = 1.4826·MAD_k (falling back to √λ̂_k when the MAD vanishes), cut at
/// the χ²(K) quantile.
pub fn robust_weights(
    scores: &DMatrix<f64>,
    eigenvalues: &[f64],
    quantile: f64,
) -> Result<DVector<f64>, FlogitError> {
    let (n, k) = scores.shape();
    if k == 0 || k != eigenvalues.len() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{k} score columns vs {} eigenvalues",
            eigenvalues.len()
        )));
    }
    if !(0.0..1.0).contains(&quantile) || quantile <= 0.0 {
        return Err(FlogitError::InvalidArgument(format!(
            "quantile {quantile} outside (0,1)"
        )));
    }
    if eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(FlogitError::InvalidArgument(
            "eigenvalues must be positive".into(),
        ));
    }
    let mut medians = vec![0.0; k];
    let mut spreads = vec![0.0; k];
    let mut any_positive = false;
    for col in 0..k {
        let v: Vec<f64> = scores.column(col).iter().copied().collect();
        let med = crate::robust_scale::median(&v);
        let mad = crate::robust_scale::mad_about(&v, med);
        medians[col] = med;
        spreads[col] = if mad > 0.0 {
            any_positive = true;
            1.4826 * mad
        } else {
            eigenvalues[col].sqrt()
        };
    }
    if !any_positive {
        return Err(FlogitError::DegenerateScores(
            "every score column has zero median absolute deviation".into(),
        ));
    }
    let cutoff = ChiSquared::new(k as f64)
        .expect("positive dof")
        .inverse_cdf(quantile);
    let weights = DVector::from_fn(n, |i, _| {
        let rmd2: f64 = (0..k)
            .map(|col| {
                let z = (scores[(i, col)] - medians[col]) / spreads[col];
                z * z
            })
            .sum();
        if rmd2 <= cutoff {
            1.0
        } else {
            0.0
        }
    });
    Ok(weights)
}

/// Which estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Ml,
    Wby,
}

/// A fitted score-space logistic model together with the eigen system it
/// lives in; `beta_coefs` are the basis coefficients of
/// β̂(t) = Σ_k γ̂_k ψ̂_k(t).
#[derive(Debug, Clone)]
pub struct LogitFit {
    pub theta: DVector<f64>,
    pub weights: DVector<f64>,
    pub beta_coefs: DVector<f64>,
    pub eigen: RobustEigenSystem,
    pub estimator: Estimator,
    pub converged: bool,
    pub objective_value: f64,
}

impl LogitFit {
    pub fn intercept(&self) -> f64 {
        self.theta[0]
    }

    pub fn gamma(&self) -> DVector<f64> {
        self.theta.rows(1, self.theta.len() - 1).into_owned()
    }
}

fn beta_from_gamma(eigen: &RobustEigenSystem, gamma: &DVector<f64>) -> DVector<f64> {
    eigen.directions.transpose() * gamma
}

/// Objective and gradient of L(θ) = Σ_i ω_i {ρ₂[d(z_iᵀθ; y_i)] + C(z_iᵀθ)}
/// over the design with intercept column z_i = (1, ξ_iᵀ)ᵀ.
struct WbyObjective<'a> {
    scores: &'a DMatrix<f64>,
    y: &'a [u8],
    weights: &'a DVector<f64>,
    loss: DevianceLoss,
}

impl WbyObjective<'_> {
    fn kappa(&self, theta: &DVector<f64>, i: usize) -> f64 {
        let mut k = theta[0];
        for col in 0..self.scores.ncols() {
            k += self.scores[(i, col)] * theta[col + 1];
        }
        k
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.scores.nrows() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let kappa = self.kappa(theta, i);
            let d = deviance(kappa, self.y[i]);
            total += w * (self.loss.rho(d) + self.loss.correction(kappa));
        }
        total
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut grad = DVector::zeros(theta.len());
        for i in 0..self.scores.nrows() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let kappa = self.kappa(theta, i);
            let d = deviance(kappa, self.y[i]);
            let chain = self.loss.rho_prime(d) * deviance_prime(kappa, self.y[i])
                + self.loss.correction_prime(kappa);
            grad[0] += w * chain;
            for col in 0..self.scores.ncols() {
                grad[col + 1] += w * chain * self.scores[(i, col)];
            }
        }
        grad
    }
}

const SEPARATION_NORM: f64 = 1e3;

/// BFGS with backtracking line search. Returns (θ, converged); errors only
/// on separation-style escape to huge norms while still improving.
fn minimize(
    objective: &WbyObjective<'_>,
    start: DVector<f64>,
    gtol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64, bool), FlogitError> {
    let p = start.len();
    let mut theta = start;
    let mut value = objective.value(&theta);
    let mut grad = objective.gradient(&theta);
    let mut inv_hess = DMatrix::<f64>::identity(p, p);
    // Summing n loss terms leaves L with an absolute resolution of a few
    // ulps; once improvements drop to that level the gradient test may be
    // unreachable in f64 even at the exact minimizer, so improvements at or
    // below this floor on consecutive steps count as convergence.
    let resolution = |v: f64| 16.0 * f64::EPSILON * v.abs().max(1.0);
    let mut stalled = 0usize;
    let mut fresh = true; // inverse Hessian is still the identity

    for _ in 0..max_iter {
        if grad.amax() <= gtol {
            return Ok((theta, value, true));
        }
        let mut direction = -(&inv_hess * &grad);
        if direction.dot(&grad) >= 0.0 {
            // Curvature update went bad; restart from steepest descent.
            inv_hess = DMatrix::identity(p, p);
            fresh = true;
            direction = -grad.clone();
        }
        // Backtracking Armijo search.
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &theta + &direction * step;
            let cand_value = objective.value(&candidate);
            if cand_value <= value + 1e-4 * step * slope {
                accepted = Some((candidate, cand_value));
                break;
            }
            step *= 0.5;
        }
        let Some((next_theta, next_value)) = accepted else {
            if fresh {
                // Even steepest descent finds no representable decrease at
                // any of 60 step scales: stationary at machine resolution.
                return Ok((theta, value, true));
            }
            inv_hess = DMatrix::identity(p, p);
            fresh = true;
            continue;
        };
        stalled = if value - next_value <= resolution(value) {
            stalled + 1
        } else {
            0
        };
        let next_grad = objective.gradient(&next_theta);
        let s = &next_theta - &theta;
        let yv = &next_grad - &grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 {
            // Standard BFGS inverse update.
            let rho = 1.0 / sy;
            let hy = &inv_hess * &yv;
            let yhy = yv.dot(&hy);
            let ss = &s * s.transpose();
            let hys = &hy * s.transpose();
            inv_hess = inv_hess - (&hys + hys.transpose()) * rho + ss * (rho * rho * yhy + rho);
            fresh = false;
        }
        theta = next_theta;
        value = next_value;
        grad = next_grad;
        if theta.norm() > SEPARATION_NORM {
            return Err(FlogitError::Separation(format!(
                "estimate escaped to norm {:.1} with the objective still decreasing",
                theta.norm()
            )));
        }
        if stalled >= 2 {
            return Ok((theta, value, true));
        }
    }
    Ok((theta, value, false))
}

/// Weighted maximum likelihood by iteratively reweighted least squares.
fn irls(
    scores: &DMatrix<f64>,
    y: &[u8],
    weights: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, bool), FlogitError> {
    let (n, k) = scores.shape();
    let p = k + 1;
    let mut theta = DVector::zeros(p);
    let z = |i: usize, col: usize| -> f64 {
        if col == 0 {
            1.0
        } else {
            scores[(i, col - 1)]
        }
    };
    for _ in 0..max_iter {
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut score_vec = DVector::<f64>::zeros(p);
        for i in 0..n {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            let mut kappa = theta[0];
            for col in 0..k {
                kappa += scores[(i, col)] * theta[col + 1];
            }
            let pi = logistic(kappa);
            let v = w * pi * (1.0 - pi);
            let r = w * (f64::from(y[i]) - pi);
            for a in 0..p {
                score_vec[a] += r * z(i, a);
                for b in a..p {
                    info[(a, b)] += v * z(i, a) * z(i, b);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let step = info
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&score_vec))
            .ok_or_else(|| {
                FlogitError::SingularDesign("singular information matrix in IRLS".into())
            })?;
        theta += &step;
        if theta.norm() > SEPARATION_NORM {
            return Err(FlogitError::Separation(format!(
                "ML estimate escaped to norm {:.1}",
                theta.norm()
            )));
        }
        if step.amax() <= tol {
            return Ok((theta, true));
        }
    }
    Ok((theta, false))
}

/// Weighted maximum likelihood (the WBY starting point): IRLS over the rows
/// with positive weight, tolerance 1e-10, at most 100 sweeps. Returns the
/// estimate and whether the step tolerance was reached.
pub fn fit_ml_weighted(
    scores: &DMatrix<f64>,
    y: &[u8],
    weights: &DVector<f64>,
) -> Result<(DVector<f64>, bool), FlogitError> {
    if scores.nrows() != y.len() || weights.len() != y.len() {
        return Err(FlogitError::DimensionMismatch(
            "scores, responses, and weights must agree in length".into(),
        ));
    }
    check_two_classes(y, weights)?;
    irls(scores, y, weights, 1e-10, 100)
}

fn check_two_classes(y: &[u8], weights: &DVector<f64>) -> Result<(), FlogitError> {
    let mut ones = 0usize;
    let mut zeros = 0usize;
    for (i, &yi) in y.iter().enumerate() {
        if weights[i] == 0.0 {
            continue;
        }
        match yi {
            0 => zeros += 1,
            1 => ones += 1,
            _ => {
                return Err(FlogitError::InvalidArgument(format!(
                    "response must be 0 or 1, found {yi} at row {i}"
                )))
            }
        }
    }
    if ones == 0 || zeros == 0 {
        return Err(FlogitError::SingleClass(format!(
            "need both classes among weighted rows: {ones} ones, {zeros} zeros"
        )));
    }
    Ok(())
}

fn validate_fit_inputs(
    scores: &DMatrix<f64>,
    y: &[u8],
    eigen: &RobustEigenSystem,
) -> Result<(), FlogitError> {
    if scores.nrows() != y.len() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} score rows vs {} responses",
            scores.nrows(),
            y.len()
        )));
    }
    if scores.ncols() == 0 || scores.ncols() != eigen.directions.nrows() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} score columns vs {} eigen directions",
            scores.ncols(),
            eigen.directions.nrows()
        )));
    }
    Ok(())
}

/// Weighted Bianco-Yohai fit: hard leverage weights, bounded deviance loss
/// with bias correction, quasi-Newton minimization started at the weighted
/// ML estimate plus seeded random restarts.
pub fn fit_wby(
    scores: &DMatrix<f64>,
    y: &[u8],
    eigen: &RobustEigenSystem,
    c: f64,
) -> Result<LogitFit, FlogitError> {
    fit_wby_with_loss(scores, y, eigen, DevianceLoss::Bounded { c }, None)
}

/// As `fit_wby` with the loss swappable and the leverage weights overridable;
/// the `Identity` loss with unit weights reproduces maximum likelihood.
pub fn fit_wby_with_loss(
    scores: &DMatrix<f64>,
    y: &[u8],
    eigen: &RobustEigenSystem,
    loss: DevianceLoss,
    weights_override: Option<DVector<f64>>,
) -> Result<LogitFit, FlogitError> {
    validate_fit_inputs(scores, y, eigen)?;
    if let DevianceLoss::Bounded { c } = loss {
        if !(c > 0.0) {
            return Err(FlogitError::InvalidArgument(
                "loss cutoff must be positive".into(),
            ));
        }
    }
    let weights = match weights_override {
        Some(w) => {
            if w.len() != y.len() {
                return Err(FlogitError::DimensionMismatch(
                    "weight vector length mismatch".into(),
                ));
            }
            w
        }
        None => robust_weights(scores, &eigen.eigenvalues, 0.975)?,
    };
    check_two_classes(y, &weights)?;

    // Initial point: weighted ML on the kept rows, zero if that fails for
    // any reason other than separation (separation there usually means
    // separation here too, but let the robust objective decide).
    let init = match irls(scores, y, &weights, 1e-10, 100) {
        Ok((theta, _)) => theta,
        Err(FlogitError::Separation(_)) | Err(FlogitError::SingularDesign(_)) => {
            DVector::zeros(scores.ncols() + 1)
        }
        Err(e) => return Err(e),
    };

    let objective = WbyObjective {
        scores,
        y,
        weights: &weights,
        loss,
    };
    let gtol = 1e-8;
    let max_iter = 500;
    let (mut best_theta, mut best_value, mut best_converged) =
        minimize(&objective, init.clone(), gtol, max_iter)?;

    // Random restarts around the initializer, fixed stream for
    // reproducibility. Each draw is multiplied by the sign of the component
    // it perturbs; the normal is symmetric so the distribution is unchanged,
    // but a coordinate sign flip of the problem now maps every restart onto
    // its mirror image and the fitted model stays exactly equivariant.
    let mut rng = ChaCha8Rng::seed_from_u64(0x77b1);
    let spread = 0.5 * init.norm().max(1.0);
    let normal = Normal::new(0.0, spread).expect("positive sd");
    for _ in 0..10 {
        let start = DVector::from_fn(init.len(), |i, _| {
            init[i] + normal.sample(&mut rng) * init[i].signum()
        });
        match minimize(&objective, start, gtol, max_iter) {
            Ok((theta, value, converged)) => {
                if value < best_value {
                    best_theta = theta;
                    best_value = value;
                    best_converged = converged;
                }
            }
            // A restart wandering off to separation does not invalidate a
            // bounded minimum found from another start.
            Err(FlogitError::Separation(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let gamma = best_theta.rows(1, scores.ncols()).into_owned();
    Ok(LogitFit {
        beta_coefs: beta_from_gamma(eigen, &gamma),
        theta: best_theta,
        weights,
        eigen: eigen.clone(),
        estimator: Estimator::Wby,
        converged: best_converged,
        objective_value: best_value,
    })
}

/// Plain maximum likelihood (IRLS), unit weights.
pub fn fit_ml(
    scores: &DMatrix<f64>,
    y: &[u8],
    eigen: &RobustEigenSystem,
) -> Result<LogitFit, FlogitError> {
    validate_fit_inputs(scores, y, eigen)?;
    let weights = DVector::from_element(y.len(), 1.0);
    check_two_classes(y, &weights)?;
    let (theta, converged) = irls(scores, y, &weights, 1e-10, 100)?;
    let objective: f64 = (0..y.len())
        .map(|i| {
            let mut kappa = theta[0];
            for col in 0..scores.ncols() {
                kappa += scores[(i, col)] * theta[col + 1];
            }
            deviance(kappa, y[i])
        })
        .sum();
    let gamma = theta.rows(1, scores.ncols()).into_owned();
    Ok(LogitFit {
        beta_coefs: beta_from_gamma(eigen, &gamma),
        theta,
        weights,
        eigen: eigen.clone(),
        estimator: Estimator::Ml,
        converged,
        objective_value: objective,
    })
}

/// Probabilities and hard labels for new curves. The new sample must be
/// uncentered and on the training basis; the training center stored in the
/// eigen system is subtracted here.
pub fn predict(
    fit: &LogitFit,
    new_sample: &crate::funcsample::FunctionalSample,
) -> Result<Vec<(f64, u8)>, FlogitError> {
    let basis = new_sample.basis();
    let trained = &fit.eigen.basis;
    if basis.num_functions() != trained.num_functions()
        || basis.domain() != trained.domain()
        || basis.knots() != trained.knots()
    {
        return Err(FlogitError::DimensionMismatch(
            "new curves are not expressed in the training basis".into(),
        ));
    }
    if new_sample.centered_mode().is_some() {
        return Err(FlogitError::InvalidArgument(
            "pass uncentered coefficients; the training center is applied here".into(),
        ));
    }
    let centered = {
        let mut coefs = new_sample.coefs().clone();
        for mut row in coefs.row_iter_mut() {
            row -= fit.eigen.center.transpose();
        }
        coefs
    };
    // Scores ξ = ⟨X − μ_train, ψ̂_k⟩ via the Gram matrix.
    let scores = centered * trained.gram() * fit.eigen.directions.transpose();
    let gamma = fit.gamma();
    let out = (0..scores.nrows())
        .map(|i| {
            let kappa = fit.theta[0] + scores.row(i).transpose().dot(&gamma);
            let p = logistic(kappa);
            (p, u8::from(p >= 0.5))
        })
        .collect();
    Ok(out)
}

/// Training-scores view of the same prediction rule, used by tests to pin
/// the score-path/function-path identity.
pub fn predict_from_scores(fit: &LogitFit, scores: &DMatrix<f64>) -> Vec<(f64, u8)> {
    let gamma = fit.gamma();
    (0..scores.nrows())
        .map(|i| {
            let kappa = fit.theta[0] + scores.row(i).transpose().dot(&gamma);
            let p = logistic(kappa);
            (p, u8::from(p >= 0.5))
        })
        .collect()
}

/// Test-visible objective evaluation for the WBY loss.
pub fn wby_objective_value(
    scores: &DMatrix<f64>,
    y: &[u8],
    weights: &DVector<f64>,
    theta: &DVector<f64>,
    c: f64,
) -> f64 {
    WbyObjective {
        scores,
        y,
        weights,
        loss: DevianceLoss::Bounded { c },
    }
    .value(theta)
}

/// Test-visible gradient of the WBY objective.
pub fn wby_objective_gradient(
    scores: &DMatrix<f64>,
    y: &[u8],
    weights: &DVector<f64>,
    theta: &DVector<f64>,
    c: f64,
) -> DVector<f64> {
    WbyObjective {
        scores,
        y,
        weights,
        loss: DevianceLoss::Bounded { c },
    }
    .gradient(theta)
}

/// A placeholder eigen system for score-space-only fits (tests, benchmarks):
/// orthonormal coordinate directions in a basis whose Gram is not consulted.
pub fn synthetic_eigen(
    basis: crate::bspline::BSplineBasis,
    directions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    scores: DMatrix<f64>,
    center: DVector<f64>,
) -> RobustEigenSystem {
    let total: f64 = eigenvalues.iter().sum();
    let mut cum = 0.0;
    let explained = eigenvalues
        .iter()
        .map(|l| {
            cum += l;
            cum / total
        })
        .collect();
    RobustEigenSystem {
        basis,
        directions,
        eigenvalues,
        scores,
        method: FpcaMethod::Robust,
        explained,
        center,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logistic_is_a_stable_symmetric_link() {
        assert_eq!(logistic(0.0), 0.5);
        let u = 13.7;
        assert!((logistic(u) + logistic(-u) - 1.0).abs() < 1e-15);
        let tiny = logistic(-40.0);
        assert!(tiny > 0.0 && tiny < 1e-17);
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
    }

    #[test]
    fn deviance_matches_its_definition() {
        assert_relative_eq!(deviance(0.0, 1), std::f64::consts::LN_2, epsilon = 1e-15);
        let kappa = 3.2;
        assert!((deviance(kappa, 1) - deviance(-kappa, 0)).abs() < 1e-15);
        assert!((deviance(50.0, 0) - 50.0).abs() < 1e-12);
        // Direct form at a benign point.
        let f = logistic(1.3);
        assert_relative_eq!(deviance(1.3, 1), -f.ln(), epsilon = 1e-12);
        assert_relative_eq!(deviance(1.3, 0), -(1.0 - f).ln(), epsilon = 1e-12);
    }

    #[test]
    fn deviance_prime_is_the_link_residual() {
        for (kappa, y) in [(0.7, 1u8), (-2.0, 0u8), (4.5, 0u8)] {
            let h = 1e-6;
            let fd = (deviance(kappa + h, y) - deviance(kappa - h, y)) / (2.0 * h);
            assert_relative_eq!(deviance_prime(kappa, y), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn d_integral_boundary_values() {
        let c = 0.5;
        assert_eq!(d_integral(0.0, c), 0.0);
        // Continuity across the kink at u = e^{-c}.
        let kink = (-c as f64).exp();
        let below = d_integral(kink - 1e-12, c);
        let above = d_integral(kink + 1e-12, c);
        assert!((below - above).abs() < 1e-10);
        // D is increasing with slope at most e^{-√c} (the plateau slope).
        let mut prev = 0.0;
        for step in 1..=100 {
            let u = step as f64 / 100.0;
            let d = d_integral(u, c);
            assert!(d >= prev);
            assert!(d - prev <= (1.0 / 100.0) * (-c.sqrt()).exp() + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn bias_correction_is_even() {
        for kappa in [1.9, 0.3, 7.5] {
            assert!((bias_correction(kappa, 0.5) - bias_correction(-kappa, 0.5)).abs() < 1e-12);
        }
        let parts = DevianceParts::at(1.9, 1, 0.5);
        assert_eq!(parts.correction, bias_correction(1.9, 0.5));
        assert_eq!(parts.deviance, deviance(1.9, 1));
    }

    #[test]
    fn hard_weights_reject_the_planted_leverage_point() {
        let n = 40;
        let mut scores = DMatrix::from_fn(n, 2, |i, k| ((i + 7 * k) % 5) as f64 * 0.3 - 0.6);
        scores[(13, 0)] = 1e6;
        let weights = robust_weights(&scores, &[1.0, 1.0], 0.975).unwrap();
        for i in 0..n {
            assert_eq!(weights[i], if i == 13 { 0.0 } else { 1.0 }, "row {i}");
        }
        // Scale equivariance: multiplying all scores by 5 changes nothing.
        let scaled = &scores * 5.0;
        assert_eq!(robust_weights(&scaled, &[1.0, 1.0], 0.975).unwrap(), weights);
    }

    #[test]
    fn degenerate_scores_are_rejected() {
        let scores = DMatrix::from_element(10, 2, 3.0);
        assert!(matches!(
            robust_weights(&scores, &[1.0, 1.0], 0.975),
            Err(FlogitError::DegenerateScores(_))
        ));
    }
}
