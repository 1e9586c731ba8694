//! Seeded data generator for the simulation study: smooth random curves, a
//! Bernoulli response driven by ∫X(t)sin(πt)dt, magnitude outliers with
//! flipped labels, and train/test splitting.

use nalgebra::DMatrix;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::FlogitError;
use crate::funcsample::RawCurves;

/// Number of random factors in the curve generator.
const N_FACTORS: usize = 5;

/// Simulation design: sample sizes, grid, contamination level, seeding.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub grid_points: usize,
    pub n_train: usize,
    /// Fraction of the training rows replaced by outliers.
    pub contamination: f64,
    pub seed: u64,
    pub n_runs: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            grid_points: 201,
            n_train: 700,
            contamination: 0.0,
            seed: 0,
            n_runs: 200,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), FlogitError> {
        if self.n < 2 || self.grid_points < 2 || self.n_runs == 0 {
            return Err(FlogitError::InvalidArgument(
                "need n >= 2, grid_points >= 2, n_runs >= 1".into(),
            ));
        }
        if self.n_train == 0 || self.n_train >= self.n {
            return Err(FlogitError::InvalidArgument(format!(
                "n_train = {} must be in 1..{}",
                self.n_train, self.n
            )));
        }
        if !self.contamination.is_finite() || self.contamination < 0.0 || self.contamination >= 1.0
        {
            return Err(FlogitError::InvalidArgument(format!(
                "contamination = {} must lie in [0, 1)",
                self.contamination
            )));
        }
        if contamination_count(self) > self.n_train {
            return Err(FlogitError::InvalidArgument(
                "contamination count exceeds the training size".into(),
            ));
        }
        Ok(())
    }
}

/// Number of training rows replaced at this contamination level, rounding
/// halves up.
pub fn contamination_count(cfg: &SimConfig) -> usize {
    (cfg.contamination * cfg.n_train as f64).round() as usize
}

/// The coefficient function the response is generated from.
pub fn beta_true(t: f64) -> f64 {
    (std::f64::consts::PI * t).sin()
}

/// A deterministic RNG for one logical stream of a seeded experiment.
/// Distinct streams under the same seed are independent.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One generated dataset, keeping the internals test-inspectable.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub curves: RawCurves,
    pub responses: Vec<u8>,
    /// Row i holds the factor draws ζ_{i1}, …, ζ_{i5}.
    pub factor_scores: DMatrix<f64>,
    /// Linear predictors l_i = ∫ X_i(t) sin(πt) dt.
    pub predictors: Vec<f64>,
}

fn curve_shape(l: usize, t: f64) -> f64 {
    let lf = l as f64;
    (-lf * lf * t).exp() + (lf * std::f64::consts::PI * t).sin()
}

fn outlier_shape(l: usize, t: f64) -> f64 {
    2.0 * (l as f64 * std::f64::consts::PI * t).sin()
}

fn unit_grid(g: usize) -> Vec<f64> {
    (0..g).map(|j| j as f64 / (g - 1) as f64).collect()
}

/// Trapezoid rule on an equally spaced grid.
fn trapezoid(values: impl ExactSizeIterator<Item = f64>, h: f64) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for (j, v) in values.enumerate() {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        acc += w * v;
    }
    acc * h
}

/// Bernoulli draws, one per probability, in order.
pub fn bernoulli_responses<R: Rng>(rng: &mut R, probs: &[f64]) -> Vec<u8> {
    probs
        .iter()
        .map(|&p| u8::from(rng.random_bool(p)))
        .collect()
}

/// Draws n random curves X_i = Σ_l ζ_l ψ_l with ζ_l ~ N(0, 4 l^{-3/2}) and
/// ψ_l(t) = e^{-l² t} + sin(lπt), then samples y_i ~ Bernoulli(F(l_i)) from
/// the logistic link with zero intercept. Factor draws come first (row by
/// row), responses after, so the stream layout is stable.
pub fn generate_detailed<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<SimDraw, FlogitError> {
    cfg.validate()?;
    let g = cfg.grid_points;
    let grid = unit_grid(g);
    let h = 1.0 / (g - 1) as f64;

    let shapes = DMatrix::from_fn(N_FACTORS, g, |l, j| curve_shape(l + 1, grid[j]));
    let normals: Vec<Normal<f64>> = (1..=N_FACTORS)
        .map(|l| Normal::new(0.0, 2.0 * (l as f64).powf(-0.75)).expect("positive sd"))
        .collect();

    let mut factor_scores = DMatrix::zeros(cfg.n, N_FACTORS);
    for i in 0..cfg.n {
        for l in 0..N_FACTORS {
            factor_scores[(i, l)] = normals[l].sample(rng);
        }
    }
    let values = &factor_scores * &shapes;

    let weight: Vec<f64> = grid.iter().map(|&t| beta_true(t)).collect();
    let predictors: Vec<f64> = (0..cfg.n)
        .map(|i| trapezoid((0..g).map(|j| values[(i, j)] * weight[j]), h))
        .collect();
    let probs: Vec<f64> = predictors
        .iter()
        .map(|&l| crate::logitfit::logistic(l))
        .collect();
    let responses = bernoulli_responses(rng, &probs);

    Ok(SimDraw {
        curves: RawCurves::new(grid, values)?,
        responses,
        factor_scores,
        predictors,
    })
}

/// As `generate_detailed`, returning only what downstream fitting consumes.
pub fn generate<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<(RawCurves, Vec<u8>), FlogitError> {
    let draw = generate_detailed(cfg, rng)?;
    Ok((draw.curves, draw.responses))
}

/// Replaces round(contamination · n_train) uniformly chosen rows of the
/// training portion (the first n_train rows) with magnitude outliers
/// X̃ = 1.25 Σ_l ζ_l · 2 sin(lπt), flipping each affected response. The ζ_l
/// are the replaced row's own factor draws, recovered exactly by least
/// squares against the five generating shapes; reusing them ties the
/// flipped label to the outlier's placement, which is what makes the
/// contamination damaging rather than mere noise. Other rows are untouched.
pub fn contaminate<R: Rng>(
    raw: &RawCurves,
    y: &[u8],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(RawCurves, Vec<u8>), FlogitError> {
    cfg.validate()?;
    if cfg.contamination <= 0.0 {
        return Err(FlogitError::InvalidArgument(
            "contaminate requires a positive contamination level".into(),
        ));
    }
    if y.len() != raw.n_curves() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} responses vs {} curves",
            y.len(),
            raw.n_curves()
        )));
    }
    if raw.n_curves() < cfg.n_train {
        return Err(FlogitError::InvalidArgument(
            "fewer curves than the configured training size".into(),
        ));
    }
    let count = contamination_count(cfg);
    let g = raw.n_points();
    let grid = raw.grid().to_vec();

    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, cfg.n_train, count).into_vec();
    chosen.sort_unstable();

    // ζ recovery design: column l holds the clean shape ψ_{l+1} on the grid.
    let clean_shapes = DMatrix::from_fn(g, N_FACTORS, |j, l| curve_shape(l + 1, grid[j]));
    let recovery = (clean_shapes.transpose() * &clean_shapes)
        .cholesky()
        .ok_or_else(|| {
            FlogitError::SingularDesign("factor shapes are collinear on this grid".into())
        })?;
    let shapes = DMatrix::from_fn(N_FACTORS, g, |l, j| outlier_shape(l + 1, grid[j]));

    let mut values = raw.values().clone();
    let mut responses = y.to_vec();
    for &i in &chosen {
        let row = values.row(i).transpose();
        let zeta = recovery.solve(&(clean_shapes.transpose() * row));
        for j in 0..g {
            let mut acc = 0.0;
            for l in 0..N_FACTORS {
                acc += zeta[l] * shapes[(l, j)];
            }
            values[(i, j)] = 1.25 * acc;
        }
        responses[i] = 1 - responses[i];
    }
    Ok((RawCurves::new(grid, values)?, responses))
}

/// Uniform train/test partition; both index lists come back sorted.
pub fn split<R: Rng>(
    n: usize,
    n_train: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>), FlogitError> {
    if n_train == 0 || n_train >= n {
        return Err(FlogitError::InvalidArgument(format!(
            "n_train = {n_train} must be in 1..{n}"
        )));
    }
    let mut train: Vec<usize> = rand::seq::index::sample(rng, n, n_train).into_vec();
    train.sort_unstable();
    let mut test = Vec::with_capacity(n - n_train);
    let mut cursor = 0;
    for i in 0..n {
        if cursor < train.len() && train[cursor] == i {
            cursor += 1;
        } else {
            test.push(i);
        }
    }
    Ok((train, test))
}
