//! Bounded loss functions and the M-estimator of scale.
//!
//! `rho1` is the Beaton-Tukey biweight loss, constant beyond its cutoff, so
//! large residuals stop contributing to the estimating equation. The scale
//! estimate solves mean(ρ₁((z−μ)/σ) / sup ρ₁) = δ; with δ = 1/2 this reaches
//! the 50% breakdown point. `rho2` is the bounded deviance loss used by the
//! robust logistic fit.

use crate::error::FlogitError;

/// Tuning for the M-scale: biweight cutoff `c1`, target `delta`, and the
/// fixed-point stopping rule.
#[derive(Debug, Clone)]
pub struct MScaleConfig {
    pub c1: f64,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MScaleConfig {
    fn default() -> Self {
        Self {
            c1: 1.56,
            delta: 0.5,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// Beaton-Tukey biweight loss: (u²/2)(1 − u²/c² + u⁴/(3c⁴)) inside the
/// cutoff, constant c²/6 beyond it.
pub fn rho1(u: f64, c: f64) -> f64 {
    let a = u.abs();
    if a <= c {
        let r2 = (u / c) * (u / c);
        0.5 * u * u * (1.0 - r2 + r2 * r2 / 3.0)
    } else {
        c * c / 6.0
    }
}

/// ρ₁′(u) = u(1 − (u/c)²)² inside the cutoff, zero beyond.
pub fn rho1_prime(u: f64, c: f64) -> f64 {
    if u.abs() <= c {
        let s = 1.0 - (u / c) * (u / c);
        u * s * s
    } else {
        0.0
    }
}

/// ρ₁ rescaled by its supremum c²/6 so it ranges over [0, 1].
pub fn rho1_normalized(u: f64, c: f64) -> f64 {
    rho1(u, c) / (c * c / 6.0)
}

/// Sample median (average of the middle pair for even lengths).
/// Reorders `values` in place.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if n % 2 == 1 {
        upper
    } else {
        // Largest element strictly left of the midpoint.
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Sample median without disturbing the input.
pub fn median(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

/// Raw median absolute deviation about `center` (no consistency factor).
pub fn mad_about(values: &[f64], center: f64) -> f64 {
    let mut devs: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median_in_place(&mut devs)
}

/// M-estimate of scale of `z` about the location `mu`.
///
/// Solves (1/n) Σ ρ₁((z_i − μ)/σ)/(c₁²/6) = δ by the fixed-point iteration
/// σ² ← σ² · mean/δ, started from 1.4826 · median|z − μ| (mean absolute
/// deviation when that is zero). Returns 0 when more than n(1−δ) residuals
/// vanish exactly: such a sample has no positive solution and the caller is
/// expected to treat the direction or sample as degenerate.
pub fn mscale(z: &[f64], mu: f64, cfg: &MScaleConfig) -> Result<f64, FlogitError> {
    let n = z.len();
    if n == 0 {
        return Err(FlogitError::InvalidArgument("mscale of empty sample".into()));
    }
    if !mu.is_finite() || z.iter().any(|v| !v.is_finite()) {
        return Err(FlogitError::InvalidArgument(
            "mscale requires finite data and location".into(),
        ));
    }
    let resid: Vec<f64> = z.iter().map(|v| v - mu).collect();
    let zeros = resid.iter().filter(|r| **r == 0.0).count();
    if zeros as f64 > n as f64 * (1.0 - cfg.delta) {
        return Ok(0.0);
    }

    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    let mut sigma = 1.4826 * median_in_place(&mut abs);
    if sigma == 0.0 {
        sigma = abs.iter().sum::<f64>() / n as f64;
    }

    let norm = cfg.c1 * cfg.c1 / 6.0;
    for _ in 0..cfg.max_iter {
        let mean: f64 = resid.iter().map(|r| rho1(r / sigma, cfg.c1)).sum::<f64>() / (norm * n as f64);
        let next = sigma * (mean / cfg.delta).sqrt();
        // Stop two orders under `tol` so the returned value itself is within
        // tol of the root, not just the last step (linear convergence keeps
        // the remaining error at a small multiple of the final step).
        let done = (next - sigma).abs() <= 0.01 * cfg.tol * next.max(f64::MIN_POSITIVE);
        sigma = next;
        if done {
            return Ok(sigma);
        }
    }
    Err(FlogitError::NonConvergence {
        iterations: cfg.max_iter,
        context: "M-scale fixed point".into(),
        last_iterate: vec![sigma],
    })
}

/// Bounded deviance loss: u·e^{−√c} for u ≤ c, then a smooth bounded tail;
/// continuous at c with derivative e^{−√u}.
pub fn rho2(u: f64, c: f64) -> Result<f64, FlogitError> {
    if u < 0.0 {
        return Err(FlogitError::InvalidArgument(format!(
            "rho2 argument must be nonnegative, got {u}"
        )));
    }
    Ok(rho2_total(u, c))
}

/// ρ₂′(u): e^{−√c} on [0, c], e^{−√u} beyond.
pub fn rho2_prime(u: f64, c: f64) -> f64 {
    if u <= c {
        (-c.sqrt()).exp()
    } else {
        (-u.sqrt()).exp()
    }
}

pub(crate) fn rho2_total(u: f64, c: f64) -> f64 {
    debug_assert!(u >= 0.0);
    let sc = c.sqrt();
    if u <= c {
        u * (-sc).exp()
    } else {
        let su = u.sqrt();
        -2.0 * (-su).exp() * (1.0 + su) + (-sc).exp() * (2.0 * (1.0 + sc) + c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rho1_basic_values() {
        assert_eq!(rho1(0.0, 1.56), 0.0);
        assert_relative_eq!(rho1(1.56, 1.56), 1.56 * 1.56 / 6.0, max_relative = 1e-15);
        assert_eq!(rho1(5.0, 1.56), 1.56 * 1.56 / 6.0);
        assert_eq!(rho1(-0.7, 1.56), rho1(0.7, 1.56));
        assert_eq!(rho1_normalized(100.0, 1.56), 1.0);
    }

    #[test]
    fn rho1_monotone_in_abs_value() {
        let c = 1.56;
        let mut last = 0.0;
        for i in 0..400 {
            let u = i as f64 * 0.01;
            let v = rho1(u, c);
            assert!(v >= last - 1e-15, "not monotone at u={u}");
            last = v;
        }
    }

    #[test]
    fn rho1_prime_matches_finite_differences_and_vanishes_outside() {
        let c = 1.56;
        for &u in &[0.0, 0.3, -0.9, 1.2, 1.5599] {
            let h = 1e-6;
            let fd = (rho1(u + h, c) - rho1(u - h, c)) / (2.0 * h);
            assert!((fd - rho1_prime(u, c)).abs() < 1e-8, "u={u}");
        }
        assert_eq!(rho1_prime(1.57, c), 0.0);
        assert_eq!(rho1_prime(-40.0, c), 0.0);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
        assert_eq!(mad_about(&[1.0, 2.0, 3.0], 2.0), 1.0);
    }

    #[test]
    fn mscale_degenerate_sample_is_zero() {
        let cfg = MScaleConfig::default();
        let z = vec![2.5; 40];
        assert_eq!(mscale(&z, 2.5, &cfg).unwrap(), 0.0);
        assert!(mscale(&[], 0.0, &cfg).is_err());
    }

    #[test]
    fn mscale_equivariance() {
        let cfg = MScaleConfig::default();
        let z: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() * 2.0 + 0.3).collect();
        let mu = median(&z);
        let s = mscale(&z, mu, &cfg).unwrap();
        let (a, b) = (-3.0, 7.0);
        let zt: Vec<f64> = z.iter().map(|v| a * v + b).collect();
        let st = mscale(&zt, a * mu + b, &cfg).unwrap();
        assert!((st - a.abs() * s).abs() < 1e-9, "{st} vs {}", a.abs() * s);
    }

    #[test]
    fn rho2_branches_meet_at_cutoff() {
        let c = 0.5_f64;
        let left = 0.5 * (-(0.5f64).sqrt()).exp();
        assert_relative_eq!(rho2(c, c).unwrap(), left, max_relative = 1e-14);
        let just_above = rho2(c + 1e-12, c).unwrap();
        assert!((just_above - left).abs() < 1e-11);
        assert_eq!(rho2(0.0, 0.5).unwrap(), 0.0);
        assert!(rho2(-0.1, 0.5).is_err());
    }

    #[test]
    fn rho2_nondecreasing_with_bounded_slope() {
        let c = 0.5_f64;
        let bound = (-c.sqrt()).exp() + 1e-6;
        let mut last = 0.0;
        for i in 1..=10_000 {
            let u = i as f64 * 0.01;
            let v = rho2(u, c).unwrap();
            assert!(v >= last);
            let slope = (v - last) / 0.01;
            assert!(slope <= bound, "slope {slope} at u={u}");
            last = v;
        }
    }
}
