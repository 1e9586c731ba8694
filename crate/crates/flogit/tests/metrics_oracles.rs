//! Metric oracles: a high-order quadrature reference for the integrated
//! squared error, a brute-force pair count for the AUC, and distributional
//! checks for the aggregation step.

use flogit::bspline::BSplineBasis;
use flogit::funcsample::{fit_coefficients, RawCurves};
use flogit::metrics::{aggregate, auc, imse, DEFAULT_IMSE_GRID};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// (#{p_i > p_j} + ½ #{p_i = p_j}) / (n₁ n₀) over all positive/negative
/// pairs, the O(n²) definition.
fn pair_count_auc(probs: &[f64], y: &[u8]) -> f64 {
    let mut crossings = 0.0;
    let mut pairs = 0u64;
    for (i, &pi) in probs.iter().enumerate() {
        if y[i] != 1 {
            continue;
        }
        for (j, &pj) in probs.iter().enumerate() {
            if y[j] != 0 {
                continue;
            }
            pairs += 1;
            if pi > pj {
                crossings += 1.0;
            } else if pi == pj {
                crossings += 0.5;
            }
        }
    }
    crossings / pairs as f64
}

#[test]
fn trapezoid_error_is_within_a_simpson_reference() {
    let basis = BSplineBasis::new((0.0, 1.0), 12).unwrap();
    // A coefficient function shaped like real fits: the least-squares spline
    // representation of a smooth curve, clearly different from the truth.
    let fit_grid: Vec<f64> = (0..201).map(|j| j as f64 / 200.0).collect();
    let target: Vec<f64> = fit_grid
        .iter()
        .map(|&t| (2.0 * t).cos() * (-t).exp())
        .collect();
    let raw = RawCurves::from_rows(fit_grid, &[target]).unwrap();
    let coefs = fit_coefficients(&raw, &basis)
        .unwrap()
        .coefs()
        .row(0)
        .transpose();
    let truth =
        |t: f64| (std::f64::consts::PI * t).sin() + 0.3 * (2.0 * std::f64::consts::PI * t).cos();

    let trap = imse(truth, &coefs, &basis, DEFAULT_IMSE_GRID).unwrap();

    // Composite Simpson on 10⁵ intervals.
    let g = 100_001;
    let h = 1.0 / (g - 1) as f64;
    let grid: Vec<f64> = (0..g).map(|j| h * j as f64).collect();
    let hat = basis.eval(&grid).unwrap() * &coefs;
    let mut simpson = 0.0;
    for (j, &t) in grid.iter().enumerate() {
        let r = truth(t) - hat[j];
        let w = if j == 0 || j == g - 1 {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        simpson += w * r * r;
    }
    simpson *= h / 3.0;

    assert!(
        (trap - simpson).abs() < 1e-6,
        "trapezoid {trap} vs Simpson {simpson}"
    );
}

#[test]
fn rank_sum_auc_equals_the_pair_count_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(90210);
    for instance in 0..200 {
        let n = 50;
        let mut probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        // Introduce genuine ties on a third of the entries.
        for p in probs.iter_mut().step_by(3) {
            *p = (*p * 10.0).round() / 10.0;
        }
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        y[0] = 0;
        y[1] = 1;
        let fast = auc(&probs, &y).unwrap();
        let slow = pair_count_auc(&probs, &y);
        assert_eq!(fast, slow, "instance {instance} disagrees");
    }
}

#[test]
fn auc_is_invariant_under_increasing_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for _ in 0..20 {
        let n = 80;
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        y[0] = 0;
        y[1] = 1;
        let mapped: Vec<f64> = probs.iter().map(|&p| p.powi(3) + 2.0 * p).collect();
        assert_eq!(auc(&probs, &y).unwrap(), auc(&mapped, &y).unwrap());
    }
}

#[test]
fn complementary_labels_reflect_the_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let n = 120;
    let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    y[0] = 0;
    y[1] = 1;
    let flipped: Vec<u8> = y.iter().map(|&v| 1 - v).collect();
    let total = auc(&probs, &y).unwrap() + auc(&probs, &flipped).unwrap();
    assert!((total - 1.0).abs() < 1e-12, "sum {total}");
}

#[test]
fn raw_mad_tracks_the_normal_quantile() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let sigma = 2.0;
    let normal = Normal::new(0.0, sigma).unwrap();
    let values: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let (med, mad) = aggregate(&values).unwrap();
    assert!(med.abs() < 0.1, "median {med}");
    let expected = 0.6745 * sigma;
    assert!(
        (mad - expected).abs() < 0.03 * expected,
        "raw MAD {mad} vs normal quantile {expected}"
    );
}
