//! Cross-checks of the B-spline machinery against independent references:
//! a textbook recursive evaluator and dense-grid quadrature of the Gram
//! integrals.

use flogit::bspline::{BSplineBasis, ORDER};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recursive two-term evaluation of basis function `i` of order `k`.
/// Intentionally the naive textbook recursion, independent of the iterative
/// production path.
fn recursive_bspline(knots: &[f64], i: usize, k: usize, t: f64, right_end: f64) -> f64 {
    if k == 1 {
        let inside = (knots[i] <= t && t < knots[i + 1])
            || (t == right_end && knots[i] < knots[i + 1] && knots[i + 1] == right_end);
        return if inside { 1.0 } else { 0.0 };
    }
    let mut value = 0.0;
    let d1 = knots[i + k - 1] - knots[i];
    if d1 > 0.0 {
        value += (t - knots[i]) / d1 * recursive_bspline(knots, i, k - 1, t, right_end);
    }
    let d2 = knots[i + k] - knots[i + 1];
    if d2 > 0.0 {
        value += (knots[i + k] - t) / d2 * recursive_bspline(knots, i + 1, k - 1, t, right_end);
    }
    value
}

fn eval_row_recursive(basis: &BSplineBasis, t: f64) -> Vec<f64> {
    let m = basis.num_functions();
    let (_, b) = basis.domain();
    (0..m)
        .map(|i| recursive_bspline(basis.knots(), i, ORDER, t, b))
        .collect()
}

#[test]
fn matches_recursive_evaluator_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for m in [4, 7, 13] {
        let basis = BSplineBasis::new((0.0, 1.0), m).unwrap();
        for _ in 0..100 {
            let t: f64 = rng.random();
            let row = basis.eval(&[t]).unwrap();
            let reference = eval_row_recursive(&basis, t);
            for f in 0..m {
                assert!(
                    (row[(0, f)] - reference[f]).abs() < 1e-12,
                    "M={m}, t={t}, φ_{f}: {} vs {}",
                    row[(0, f)],
                    reference[f]
                );
            }
        }
    }
}

#[test]
fn matches_recursive_evaluator_at_endpoints_and_knots() {
    let basis = BSplineBasis::new((0.0, 1.0), 8).unwrap();
    let mut points: Vec<f64> = basis.knots().to_vec();
    points.dedup();
    for &t in &points {
        let row = basis.eval(&[t]).unwrap();
        let reference = eval_row_recursive(&basis, t);
        for f in 0..8 {
            assert!((row[(0, f)] - reference[f]).abs() < 1e-12, "t={t}, φ_{f}");
        }
    }
}

/// Trapezoid quadrature of φ_a φ_b refined per knot span, so the integrand is
/// a smooth polynomial on every subinterval.
fn gram_trapezoid_per_span(basis: &BSplineBasis, points_per_span: usize) -> DMatrix<f64> {
    let m = basis.num_functions();
    let knots = basis.knots();
    let mut gram = DMatrix::zeros(m, m);
    for span in (ORDER - 1)..m {
        let (x0, x1) = (knots[span], knots[span + 1]);
        if x1 <= x0 {
            continue;
        }
        let h = (x1 - x0) / (points_per_span - 1) as f64;
        for j in 0..points_per_span {
            let t = if j == points_per_span - 1 { x1 } else { x0 + j as f64 * h };
            // Half weights at the ends, but attribute the shared knot points
            // to a single span to avoid double counting: use open right end.
            let w = if j == 0 || j == points_per_span - 1 { 0.5 * h } else { h };
            let row = eval_row_recursive(basis, t.min(x1 - 1e-14 * (x1 - x0)).max(x0));
            for r1 in 0..m {
                if row[r1] == 0.0 {
                    continue;
                }
                for r2 in 0..m {
                    gram[(r1, r2)] += w * row[r1] * row[r2];
                }
            }
        }
    }
    gram
}

#[test]
fn gram_entry_matches_global_trapezoid_for_m6() {
    let basis = BSplineBasis::new((0.0, 1.0), 6).unwrap();
    let n = 100_000;
    let mut phi1_sq = 0.0;
    for j in 0..n {
        let t = j as f64 / (n - 1) as f64;
        let v = eval_row_recursive(&basis, t)[0];
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        phi1_sq += w * v * v / (n - 1) as f64;
    }
    assert!(
        (basis.gram()[(0, 0)] - phi1_sq).abs() < 1e-8,
        "Φ_11 = {} vs trapezoid {phi1_sq}",
        basis.gram()[(0, 0)]
    );
}

#[test]
fn gram_matches_dense_quadrature_for_m_4_10_25() {
    for m in [4usize, 10, 25] {
        let basis = BSplineBasis::new((0.0, 1.0), m).unwrap();
        let oracle = gram_trapezoid_per_span(&basis, 20_001);
        for r1 in 0..m {
            for r2 in 0..m {
                let g = basis.gram()[(r1, r2)];
                let o = oracle[(r1, r2)];
                let scale = g.abs().max(o.abs());
                if scale == 0.0 {
                    continue;
                }
                assert!(
                    (g - o).abs() / scale < 1e-8,
                    "M={m}, entry ({r1},{r2}): {g} vs {o}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_of_unity_everywhere(m in 3usize..30, raw_t in 0.0f64..=1.0) {
        let basis = BSplineBasis::new((0.0, 1.0), m).unwrap();
        let row = basis.eval(&[raw_t]).unwrap();
        let sum: f64 = row.row(0).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for f in 0..m {
            prop_assert!(row[(0, f)] >= 0.0);
        }
    }
}

#[test]
fn partition_of_unity_on_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let basis = BSplineBasis::new((-1.0, 2.5), 17).unwrap();
    for _ in 0..1000 {
        let t = rng.random_range(-1.0..=2.5);
        let row = basis.eval(&[t]).unwrap();
        let sum: f64 = row.row(0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12, "t={t}: sum={sum}");
    }
}
