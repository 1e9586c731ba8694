//! Quadratic B-spline bases on a closed interval.
//!
//! The basis is clamped: boundary knots carry full multiplicity, interior
//! knots are equally spaced. All inner products between functions expanded
//! in the basis reduce to bilinear forms through the Gram matrix
//! `Φ_{mm'} = ∫ φ_m(t) φ_{m'}(t) dt`, which is computed exactly by per-span
//! Gauss-Legendre quadrature (products of quadratics have degree 4, so the
//! 3-point rule is exact). The symmetric square root `Φ^{1/2}` and its
//! inverse turn the Φ-metric into the Euclidean one, which the principal
//! component routines rely on.

use nalgebra::{DMatrix, DVector};

use crate::error::FlogitError;

/// Polynomial degree + 1; quadratic splines throughout.
pub const ORDER: usize = 3;

/// 3-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 3] = [-0.7745966692414834, 0.0, 0.7745966692414834];
const GL_WEIGHTS: [f64; 3] = [0.5555555555555556, 0.8888888888888888, 0.5555555555555556];

#[derive(Debug, Clone)]
pub struct BSplineBasis {
    domain: (f64, f64),
    num_functions: usize,
    knots: Vec<f64>,
    gram: DMatrix<f64>,
    gram_sqrt: DMatrix<f64>,
    gram_inv_sqrt: DMatrix<f64>,
}

impl BSplineBasis {
    /// Builds the quadratic basis with `num_functions` functions on `domain`.
    ///
    /// The knot vector has `num_functions + ORDER` entries: the endpoints
    /// repeated `ORDER` times and `num_functions - ORDER` equally spaced
    /// interior knots.
    pub fn new(domain: (f64, f64), num_functions: usize) -> Result<Self, FlogitError> {
        let (a, b) = domain;
        if !a.is_finite() || !b.is_finite() || !(a < b) {
            return Err(FlogitError::InvalidArgument(format!(
                "domain [{a}, {b}] must be finite and nondegenerate"
            )));
        }
        if num_functions < ORDER {
            return Err(FlogitError::InvalidArgument(format!(
                "need at least {ORDER} basis functions, got {num_functions}"
            )));
        }

        let m = num_functions;
        let mut knots = Vec::with_capacity(m + ORDER);
        knots.extend(std::iter::repeat(a).take(ORDER));
        let spans = (m - ORDER + 1) as f64;
        for j in 1..=(m - ORDER) {
            knots.push(a + (b - a) * j as f64 / spans);
        }
        knots.extend(std::iter::repeat(b).take(ORDER));

        let gram = gram_matrix(&knots, m);
        let eig = gram.clone().symmetric_eigen();
        let min_ev = eig.eigenvalues.min();
        if min_ev <= 0.0 {
            return Err(FlogitError::SingularDesign(format!(
                "Gram matrix not positive definite (min eigenvalue {min_ev:e})"
            )));
        }
        let sqrt_vals = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| l.sqrt()));
        let gram_sqrt = symmetrize(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose());
        let inv_vals = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()));
        let gram_inv_sqrt = symmetrize(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose());

        Ok(Self {
            domain,
            num_functions,
            knots,
            gram,
            gram_sqrt,
            gram_inv_sqrt,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn num_functions(&self) -> usize {
        self.num_functions
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Symmetric positive-definite square root of the Gram matrix.
    pub fn gram_sqrt(&self) -> &DMatrix<f64> {
        &self.gram_sqrt
    }

    /// Inverse of `gram_sqrt`; maps Euclidean coordinates back to basis ones.
    pub fn gram_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.gram_inv_sqrt
    }

    /// Evaluates every basis function on a grid; row i is φ_1..φ_M at t_i.
    pub fn eval(&self, t_grid: &[f64]) -> Result<DMatrix<f64>, FlogitError> {
        let mut out = DMatrix::zeros(t_grid.len(), self.num_functions);
        for (i, &t) in t_grid.iter().enumerate() {
            let (start, vals) = self.eval_nonzero(t)?;
            for (offset, &v) in vals.iter().enumerate() {
                out[(i, start + offset)] = v;
            }
        }
        Ok(out)
    }

    /// Values of the `ORDER` basis functions supported at `t`, with the index
    /// of the first one. All other basis functions vanish at `t`.
    pub fn eval_nonzero(&self, t: f64) -> Result<(usize, [f64; ORDER]), FlogitError> {
        let (a, b) = self.domain;
        if !(t >= a && t <= b) {
            return Err(FlogitError::OutOfDomain(format!(
                "t = {t} outside [{a}, {b}]"
            )));
        }
        let span = self.find_span(t);
        // Triangular recurrence over degrees 1 and 2; `vals[r]` tracks the
        // value of basis function `span - j + r` at degree j.
        let knots = &self.knots;
        let mut vals = [1.0_f64, 0.0, 0.0];
        let mut left = [0.0_f64; ORDER];
        let mut right = [0.0_f64; ORDER];
        for j in 1..ORDER {
            left[j] = t - knots[span + 1 - j];
            right[j] = knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        Ok((span + 1 - ORDER, vals))
    }

    /// Inner product ⟨f, g⟩ = aᵀ Φ b of two basis expansions.
    pub fn inner_product(&self, coef_a: &DVector<f64>, coef_b: &DVector<f64>) -> Result<f64, FlogitError> {
        let m = self.num_functions;
        if coef_a.len() != m || coef_b.len() != m {
            return Err(FlogitError::DimensionMismatch(format!(
                "coefficient lengths {} and {} do not match {m} basis functions",
                coef_a.len(),
                coef_b.len()
            )));
        }
        Ok(coef_a.dot(&(&self.gram * coef_b)))
    }

    /// Φ-norm ‖f‖ = sqrt(aᵀ Φ a); clamps tiny negative rounding to zero.
    pub fn norm(&self, coef: &DVector<f64>) -> Result<f64, FlogitError> {
        Ok(self.inner_product(coef, coef)?.max(0.0).sqrt())
    }

    /// Index i of the knot span knots[i] <= t < knots[i+1], with the right
    /// endpoint folded into the last nonempty span.
    fn find_span(&self, t: f64) -> usize {
        let m = self.num_functions;
        let raw = self.knots.partition_point(|&k| k <= t);
        raw.saturating_sub(1).clamp(ORDER - 1, m - 1)
    }
}

fn symmetrize(mut mat: DMatrix<f64>) -> DMatrix<f64> {
    let t = mat.transpose();
    mat += t;
    mat.scale_mut(0.5);
    mat
}

/// Gram matrix by 3-point Gauss-Legendre per nonempty knot span: exact for
/// products of quadratics.
fn gram_matrix(knots: &[f64], m: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(m, m);
    for span in (ORDER - 1)..m {
        let (x0, x1) = (knots[span], knots[span + 1]);
        if x1 <= x0 {
            continue;
        }
        let half = 0.5 * (x1 - x0);
        let mid = 0.5 * (x0 + x1);
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let t = mid + half * node;
            let w = half * weight;
            let (start, vals) = eval_nonzero_raw(knots, t, span);
            for r1 in 0..ORDER {
                for r2 in 0..ORDER {
                    gram[(start + r1, start + r2)] += w * vals[r1] * vals[r2];
                }
            }
        }
    }
    symmetrize(gram)
}

/// Same triangular recurrence as `eval_nonzero`, with the span supplied by
/// the quadrature loop (construction-time path, before `self` exists).
fn eval_nonzero_raw(knots: &[f64], t: f64, span: usize) -> (usize, [f64; ORDER]) {
    let mut vals = [1.0_f64, 0.0, 0.0];
    let mut left = [0.0_f64; ORDER];
    let mut right = [0.0_f64; ORDER];
    for j in 1..ORDER {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    (span + 1 - ORDER, vals)
}
