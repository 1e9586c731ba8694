//! Model persistence: a schema-versioned JSON document carrying the basis
//! description, the centering, the eigen system, and the fitted logistic
//! coefficients. JSON floats round-trip bit for bit, so save, load, predict
//! reproduces in-sample probabilities exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use flogit::bspline::BSplineBasis;
use flogit::fpca::{FpcaMethod, RobustEigenSystem};
use flogit::funcsample::CenterMode;
use flogit::logitfit::{Estimator, LogitFit};

use crate::errors::CliError;
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub domain: (f64, f64),
    pub num_basis: usize,
    /// Full clamped knot vector, stored for inspection and verified against
    /// the rebuilt basis on load.
    pub knots: Vec<f64>,
    /// "mean" or "l1-median".
    pub center_mode: String,
    pub center: Vec<f64>,
    pub num_components: usize,
    /// K rows of M basis coefficients, the eigenfunctions ψ̂_k.
    pub directions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    /// "classical" or "robust".
    pub fpca_method: String,
    /// "ml" or "wby".
    pub estimator: String,
    /// Intercept first, then the K score coefficients.
    pub theta: Vec<f64>,
    pub converged: bool,
    pub objective: f64,
    pub weights_rejected: usize,
    pub n_train: usize,
}

impl ModelFile {
    pub fn from_fit(fit: &LogitFit, center_mode: CenterMode, n_train: usize) -> Self {
        let eigen = &fit.eigen;
        let basis = &eigen.basis;
        let k = eigen.num_components();
        Self {
            schema_version: SCHEMA_VERSION,
            domain: basis.domain(),
            num_basis: basis.num_functions(),
            knots: basis.knots().to_vec(),
            center_mode: match center_mode {
                CenterMode::Mean => "mean".into(),
                CenterMode::L1Median => "l1-median".into(),
            },
            center: eigen.center.iter().copied().collect(),
            num_components: k,
            directions: (0..k)
                .map(|r| eigen.directions.row(r).iter().copied().collect())
                .collect(),
            eigenvalues: eigen.eigenvalues.clone(),
            explained: eigen.explained.clone(),
            fpca_method: match eigen.method {
                FpcaMethod::Classical => "classical".into(),
                FpcaMethod::Robust => "robust".into(),
            },
            estimator: match fit.estimator {
                Estimator::Ml => "ml".into(),
                Estimator::Wby => "wby".into(),
            },
            theta: fit.theta.iter().copied().collect(),
            converged: fit.converged,
            objective: fit.objective_value,
            weights_rejected: fit.weights.iter().filter(|&&w| w == 0.0).count(),
            n_train,
        }
    }

    pub fn center_mode(&self) -> Result<CenterMode, CliError> {
        match self.center_mode.as_str() {
            "mean" => Ok(CenterMode::Mean),
            "l1-median" => Ok(CenterMode::L1Median),
            other => Err(CliError::Parse(format!(
                "unknown centering mode {other:?}"
            ))),
        }
    }

    /// Rebuilds the fitted model, verifying every stored dimension against
    /// the reconstructed basis.
    pub fn to_fit(&self) -> Result<LogitFit, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported model schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let basis = BSplineBasis::new(self.domain, self.num_basis)?;
        if basis.knots() != self.knots.as_slice() {
            return Err(CliError::Parse(
                "stored knots do not match the basis rebuilt from (domain, num_basis)".into(),
            ));
        }
        let m = self.num_basis;
        let k = self.num_components;
        if self.directions.len() != k
            || self.directions.iter().any(|row| row.len() != m)
            || self.eigenvalues.len() != k
            || self.explained.len() != k
            || self.center.len() != m
            || self.theta.len() != k + 1
        {
            return Err(CliError::Parse(
                "model fields disagree on the number of components or basis functions".into(),
            ));
        }
        let directions = DMatrix::from_fn(k, m, |r, c| self.directions[r][c]);
        let method = match self.fpca_method.as_str() {
            "classical" => FpcaMethod::Classical,
            "robust" => FpcaMethod::Robust,
            other => {
                return Err(CliError::Parse(format!(
                    "unknown FPCA method {other:?}"
                )))
            }
        };
        let estimator = match self.estimator.as_str() {
            "ml" => Estimator::Ml,
            "wby" => Estimator::Wby,
            other => {
                return Err(CliError::Parse(format!(
                    "unknown estimator {other:?}"
                )))
            }
        };
        self.center_mode()?;
        let eigen = RobustEigenSystem {
            basis,
            directions: directions.clone(),
            eigenvalues: self.eigenvalues.clone(),
            scores: DMatrix::zeros(0, k),
            method,
            explained: self.explained.clone(),
            center: DVector::from_vec(self.center.clone()),
        };
        let theta = DVector::from_vec(self.theta.clone());
        let gamma = theta.rows(1, k).into_owned();
        Ok(LogitFit {
            beta_coefs: directions.transpose() * gamma,
            theta,
            weights: DVector::zeros(0),
            eigen,
            estimator,
            converged: self.converged,
            objective_value: self.objective,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serializing model: {e}")))?;
        io::write_string(path, &(text + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}
