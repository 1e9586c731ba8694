//! The four subcommands behind the binary. Everything here is deterministic
//! given the flags: random number use flows through named streams of the
//! seeded generator, so reruns and thread counts cannot change the output.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use flogit::bspline::BSplineBasis;
use flogit::fpca::{fpca_classical, fpca_robust, RobustEigenSystem, DEFAULT_REFINE_ROUNDS};
use flogit::funcsample::{fit_coefficients, select_num_basis, CenterMode, RawCurves};
use flogit::logitfit::{fit_ml, fit_wby, predict, LogitFit};
use flogit::metrics::{auc, imse, McResult, DEFAULT_IMSE_GRID};
use flogit::robust_scale::MScaleConfig;
use flogit::simgen::{beta_true, contaminate, generate, run_rng, split, SimConfig};
use flogit::FlogitError;

use crate::errors::CliError;
use crate::io;
use crate::model::ModelFile;

/// Deviance cutoff for the bounded loss; the value used throughout the
/// simulation study.
pub const WBY_LOSS_CUTOFF: f64 = 0.5;

/// Contamination levels the simulation study was calibrated on. Other
/// levels are accepted with a warning.
pub const STUDY_LEVELS: [f64; 5] = [0.0, 0.01, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FpcaMl,
    RfpcaWby,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "fpca-ml" => Ok(Self::FpcaMl),
            "rfpca-wby" => Ok(Self::RfpcaWby),
            other => Err(CliError::Usage(format!(
                "unknown method {other:?} (expected fpca-ml or rfpca-wby)"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::FpcaMl => "fpca-ml",
            Self::RfpcaWby => "rfpca-wby",
        }
    }

    pub fn center_mode(self) -> CenterMode {
        match self {
            Self::FpcaMl => CenterMode::Mean,
            Self::RfpcaWby => CenterMode::L1Median,
        }
    }
}

fn check_contamination(level: f64) -> Result<(), CliError> {
    if !level.is_finite() || !(0.0..0.5).contains(&level) {
        return Err(CliError::Usage(format!(
            "contamination {level} outside [0, 0.5)"
        )));
    }
    if !STUDY_LEVELS.iter().any(|&s| s == level) {
        eprintln!(
            "warning: contamination {level} is outside the calibrated grid {STUDY_LEVELS:?}"
        );
    }
    Ok(())
}

/// Centers, extracts components, and fits the score-space logistic model.
/// Returns the fit along with the centering mode baked into it.
pub fn fit_pipeline(
    raw: &RawCurves,
    y: &[u8],
    method: Method,
    var_threshold: f64,
    num_basis: Option<usize>,
) -> Result<(LogitFit, CenterMode, usize), CliError> {
    if y.len() != raw.n_curves() {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} responses vs {} curves",
            y.len(),
            raw.n_curves()
        ))
        .into());
    }
    let m = match num_basis {
        Some(m) => m,
        None => select_num_basis(raw)?,
    };
    let basis = BSplineBasis::new(raw.domain(), m)?;
    let sample = fit_coefficients(raw, &basis)?;
    let mode = method.center_mode();
    let centered = sample.center(mode)?;
    let fit = match method {
        Method::FpcaMl => {
            let eigen = fpca_classical(&centered, var_threshold)?;
            let scores = eigen.scores.clone();
            fit_ml(&scores, y, &eigen)?
        }
        Method::RfpcaWby => {
            let eigen = fpca_robust(
                &centered,
                &MScaleConfig::default(),
                var_threshold,
                DEFAULT_REFINE_ROUNDS,
            )?;
            let scores = eigen.scores.clone();
            fit_wby(&scores, y, &eigen, WBY_LOSS_CUTOFF)?
        }
    };
    Ok((fit, mode, m))
}

/// Writes `{out}_curves.csv` and `{out}_responses.csv` for one generated
/// dataset of n curves, the first n_train rows contaminated at the
/// requested level.
pub fn cmd_simulate(
    n: usize,
    grid_points: usize,
    n_train: usize,
    contamination: f64,
    seed: u64,
    out: &str,
) -> Result<(), CliError> {
    check_contamination(contamination)?;
    let cfg = SimConfig {
        n,
        grid_points,
        n_train,
        contamination,
        seed,
        n_runs: 1,
    };
    let mut rng = run_rng(seed, 0);
    let (mut raw, mut y) = generate(&cfg, &mut rng)?;
    if contamination > 0.0 {
        let mut crng = run_rng(seed, 8 + (contamination * 1000.0).round() as u64);
        let pair = contaminate(&raw, &y, &cfg, &mut crng)?;
        raw = pair.0;
        y = pair.1;
    }
    let curves_path = format!("{out}_curves.csv");
    let responses_path = format!("{out}_responses.csv");
    io::write_string(Path::new(&curves_path), &io::curves_to_csv(&raw))?;
    io::write_string(Path::new(&responses_path), &io::responses_to_csv(&y))?;
    println!(
        "wrote {n} curves on {grid_points} points to {curves_path}, responses to {responses_path}"
    );
    Ok(())
}

/// Fits one model from curve and response files and saves it as JSON.
#[allow(clippy::too_many_arguments)]
pub fn cmd_fit(
    curves: &Path,
    response: &Path,
    method: Method,
    var_threshold: f64,
    num_basis: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let raw = io::parse_curves_csv(curves)?;
    let y = io::parse_response_csv(response)?;
    let (fit, mode, m) = fit_pipeline(&raw, &y, method, var_threshold, num_basis)?;
    let file = ModelFile::from_fit(&fit, mode, raw.n_curves());
    file.save(out)?;
    println!(
        "method {}: {} basis functions, {} components, {} of {} observations rejected, objective {}{}",
        method.label(),
        m,
        fit.eigen.num_components(),
        file.weights_rejected,
        raw.n_curves(),
        fit.objective_value,
        if fit.converged { "" } else { " (not converged)" },
    );
    println!("model written to {}", out.display());
    Ok(())
}

/// Scores new curves with a saved model, writing index, probability, class.
pub fn cmd_predict(model_path: &Path, curves: &Path, out: &Path) -> Result<(), CliError> {
    let file = ModelFile::load(model_path)?;
    let fit = file.to_fit()?;
    let raw = io::parse_curves_csv(curves)?;
    if raw.domain() != file.domain {
        return Err(FlogitError::DimensionMismatch(format!(
            "curves observed on [{}, {}] but the model was trained on [{}, {}]",
            raw.domain().0,
            raw.domain().1,
            file.domain.0,
            file.domain.1
        ))
        .into());
    }
    if raw.n_points() < file.num_basis + 1 {
        return Err(FlogitError::DimensionMismatch(format!(
            "{} grid columns cannot carry the model's {} basis functions",
            raw.n_points(),
            file.num_basis
        ))
        .into());
    }
    let sample = fit_coefficients(&raw, &fit.eigen.basis)?;
    let preds = predict(&fit, &sample)?;
    io::write_string(out, &io::predictions_to_csv(&preds))?;
    println!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(())
}

/// Everything one Monte Carlo invocation needs, assembled by the binary.
#[derive(Debug, Clone)]
pub struct McPlan {
    pub runs: usize,
    pub n: usize,
    pub grid_points: usize,
    pub n_train: usize,
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    pub var_threshold: f64,
    pub num_basis: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// One successful fit inside the study.
#[derive(Debug, Clone, Copy)]
pub struct RunMetrics {
    pub imse: f64,
    pub auc: f64,
    pub seconds: f64,
    /// max |ΨΦΨᵀ − I| over the fitted directions, carried so downstream
    /// checks can confirm orthonormality on every fit without refitting.
    pub gram_deviation: f64,
}

/// All runs of one method at one contamination level.
#[derive(Debug, Clone)]
pub struct McCell {
    pub method: Method,
    pub level: f64,
    /// Indexed by run; errors keep the failing runs visible.
    pub outcomes: Vec<Result<RunMetrics, String>>,
    /// None when every run failed.
    pub result: Option<McResult>,
    pub failures: usize,
}

fn orthonormality_deviation(eigen: &RobustEigenSystem) -> f64 {
    let d = &eigen.directions;
    let product = d * eigen.basis.gram() * d.transpose();
    let k = product.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..k {
        for c in 0..k {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((product[(r, c)] - target).abs());
        }
    }
    worst
}

fn rows_of(raw: &RawCurves, lo: usize, len: usize) -> Result<RawCurves, FlogitError> {
    RawCurves::new(raw.grid().to_vec(), raw.values().rows(lo, len).into_owned())
}

/// One run at every level for every method. Stream layout off the run base:
/// +0 generates, +1 splits, +8 + round(1000·level) contaminates, so levels
/// and methods can be added or dropped without disturbing each other.
fn run_once(plan: &McPlan, run: usize) -> Vec<Vec<Result<RunMetrics, String>>> {
    let n_levels = plan.levels.len();
    let n_methods = plan.methods.len();
    let fail_all = |msg: String| -> Vec<Vec<Result<RunMetrics, String>>> {
        vec![vec![Err(msg); n_methods]; n_levels]
    };

    let base = run as u64 * 1024;
    let cfg = SimConfig {
        n: plan.n,
        grid_points: plan.grid_points,
        n_train: plan.n_train,
        contamination: 0.0,
        seed: plan.seed,
        n_runs: 1,
    };
    let mut gen_rng = run_rng(plan.seed, base);
    let (raw, y) = match generate(&cfg, &mut gen_rng) {
        Ok(pair) => pair,
        Err(e) => return fail_all(format!("generate: {e}")),
    };

    // Reorder so the training block leads: contamination targets the first
    // n_train rows by construction.
    let mut split_rng = run_rng(plan.seed, base + 1);
    let (train_idx, test_idx) = match split(plan.n, plan.n_train, &mut split_rng) {
        Ok(pair) => pair,
        Err(e) => return fail_all(format!("split: {e}")),
    };
    let order: Vec<usize> = train_idx.iter().chain(test_idx.iter()).copied().collect();
    let reordered_values = DMatrix::from_fn(plan.n, plan.grid_points, |i, j| {
        raw.values()[(order[i], j)]
    });
    let reordered = match RawCurves::new(raw.grid().to_vec(), reordered_values) {
        Ok(r) => r,
        Err(e) => return fail_all(format!("reorder: {e}")),
    };
    let reordered_y: Vec<u8> = order.iter().map(|&i| y[i]).collect();
    let y_test = &reordered_y[plan.n_train..];

    plan.levels
        .iter()
        .map(|&level| {
            let cell = (|| -> Result<(RawCurves, Vec<u8>), String> {
                if level == 0.0 {
                    return Ok((reordered.clone(), reordered_y.clone()));
                }
                let level_cfg = SimConfig {
                    contamination: level,
                    ..cfg
                };
                let mut crng =
                    run_rng(plan.seed, base + 8 + (level * 1000.0).round() as u64);
                contaminate(&reordered, &reordered_y, &level_cfg, &mut crng)
                    .map_err(|e| format!("contaminate: {e}"))
            })();
            let (craw, cy) = match cell {
                Ok(pair) => pair,
                Err(msg) => return vec![Err(msg); n_methods],
            };
            let prep = (|| -> Result<(RawCurves, RawCurves, usize), String> {
                let train = rows_of(&craw, 0, plan.n_train).map_err(|e| e.to_string())?;
                let test = rows_of(&craw, plan.n_train, plan.n - plan.n_train)
                    .map_err(|e| e.to_string())?;
                let m = match plan.num_basis {
                    Some(m) => m,
                    None => select_num_basis(&train).map_err(|e| e.to_string())?,
                };
                Ok((train, test, m))
            })();
            let (train_raw, test_raw, m) = match prep {
                Ok(t) => t,
                Err(msg) => return vec![Err(msg); n_methods],
            };
            let y_train = &cy[..plan.n_train];

            plan.methods
                .iter()
                .map(|&method| {
                    let started = Instant::now();
                    let basis =
                        BSplineBasis::new(train_raw.domain(), m).map_err(|e| e.to_string())?;
                    let (fit, _, _) = fit_pipeline(
                        &train_raw,
                        y_train,
                        method,
                        plan.var_threshold,
                        Some(m),
                    )
                    .map_err(|e| e.to_string())?;
                    let seconds = started.elapsed().as_secs_f64();
                    let gram_deviation = orthonormality_deviation(&fit.eigen);
                    let test_sample =
                        fit_coefficients(&test_raw, &basis).map_err(|e| e.to_string())?;
                    let preds = predict(&fit, &test_sample).map_err(|e| e.to_string())?;
                    let probs: Vec<f64> = preds.iter().map(|&(p, _)| p).collect();
                    let auc_value = auc(&probs, y_test).map_err(|e| e.to_string())?;
                    let imse_value = imse(beta_true, &fit.beta_coefs, &basis, DEFAULT_IMSE_GRID)
                        .map_err(|e| e.to_string())?;
                    Ok(RunMetrics {
                        imse: imse_value,
                        auc: auc_value,
                        seconds,
                        gram_deviation,
                    })
                })
                .collect()
        })
        .collect()
}

/// Runs the study and aggregates each (method, level) cell. Results are
/// deterministic for a given plan regardless of the thread count; only the
/// recorded wall times vary.
pub fn run_monte_carlo(plan: &McPlan) -> Result<Vec<McCell>, CliError> {
    if plan.runs == 0 {
        return Err(CliError::Usage("need at least one run".into()));
    }
    if plan.methods.is_empty() {
        return Err(CliError::Usage("need at least one method".into()));
    }
    if plan.levels.is_empty() {
        return Err(CliError::Usage("need at least one contamination level".into()));
    }
    for &level in &plan.levels {
        check_contamination(level)?;
    }

    let work = |plan: &McPlan| -> Vec<Vec<Vec<Result<RunMetrics, String>>>> {
        (0..plan.runs)
            .into_par_iter()
            .map(|run| run_once(plan, run))
            .collect()
    };
    let per_run = match plan.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| work(plan))
        }
        None => work(plan),
    };

    let mut cells = Vec::with_capacity(plan.methods.len() * plan.levels.len());
    for (mi, &method) in plan.methods.iter().enumerate() {
        for (li, &level) in plan.levels.iter().enumerate() {
            let outcomes: Vec<Result<RunMetrics, String>> = (0..plan.runs)
                .map(|run| per_run[run][li][mi].clone())
                .collect();
            let mut imse_runs = Vec::new();
            let mut auc_runs = Vec::new();
            let mut fit_seconds = Vec::new();
            let mut failures = 0;
            for outcome in &outcomes {
                match outcome {
                    Ok(m) => {
                        imse_runs.push(m.imse);
                        auc_runs.push(m.auc);
                        fit_seconds.push(m.seconds);
                    }
                    Err(_) => failures += 1,
                }
            }
            let result = if imse_runs.is_empty() {
                None
            } else {
                Some(McResult::new(method.label(), imse_runs, auc_runs, fit_seconds)?)
            };
            cells.push(McCell {
                method,
                level,
                outcomes,
                result,
                failures,
            });
        }
    }
    Ok(cells)
}

/// Summary CSV: one row per (method, contamination) cell.
pub fn summary_csv(cells: &[McCell]) -> String {
    let mut out = String::from("method,contamination,median_imse,mad_imse,median_auc,mad_auc\n");
    for cell in cells {
        match &cell.result {
            Some(r) => out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.method.label(),
                cell.level,
                r.median_imse,
                r.mad_imse,
                r.median_auc,
                r.mad_auc
            )),
            None => out.push_str(&format!(
                "{},{},nan,nan,nan,nan\n",
                cell.method.label(),
                cell.level
            )),
        }
    }
    out
}

/// Per-run CSV, kept separate from the summary so the deterministic part of
/// the output never mixes with wall-clock noise.
pub fn runs_csv(cells: &[McCell]) -> String {
    let mut out = String::from("method,contamination,run,imse,auc,status\n");
    for cell in cells {
        for (run, outcome) in cell.outcomes.iter().enumerate() {
            match outcome {
                Ok(m) => out.push_str(&format!(
                    "{},{},{run},{},{},ok\n",
                    cell.method.label(),
                    cell.level,
                    m.imse,
                    m.auc
                )),
                Err(msg) => out.push_str(&format!(
                    "{},{},{run},nan,nan,failed: {}\n",
                    cell.method.label(),
                    cell.level,
                    msg.replace([',', '\n'], ";")
                )),
            }
        }
    }
    out
}

/// Wall times per fit. Not deterministic; excluded from the other outputs.
pub fn times_csv(cells: &[McCell]) -> String {
    let mut out = String::from("method,contamination,run,seconds\n");
    for cell in cells {
        for (run, outcome) in cell.outcomes.iter().enumerate() {
            if let Ok(m) = outcome {
                out.push_str(&format!(
                    "{},{},{run},{}\n",
                    cell.method.label(),
                    cell.level,
                    m.seconds
                ));
            }
        }
    }
    out
}

/// Runs the full study and writes the summary (plus optional per-run and
/// timing files). Failed runs are reported and excluded from the medians,
/// never silently dropped.
#[allow(clippy::too_many_arguments)]
pub fn cmd_mc(
    plan: &McPlan,
    out: &Path,
    runs_out: Option<&Path>,
    times_out: Option<&Path>,
) -> Result<(), CliError> {
    let cells = run_monte_carlo(plan)?;
    io::write_string(out, &summary_csv(&cells))?;
    if let Some(path) = runs_out {
        io::write_string(path, &runs_csv(&cells))?;
    }
    if let Some(path) = times_out {
        io::write_string(path, &times_csv(&cells))?;
    }
    let mut total_failures = 0;
    for cell in &cells {
        if cell.failures > 0 {
            total_failures += cell.failures;
            eprintln!(
                "warning: {} at contamination {}: {} of {} runs failed and were excluded",
                cell.method.label(),
                cell.level,
                cell.failures,
                plan.runs
            );
            for (run, outcome) in cell.outcomes.iter().enumerate() {
                if let Err(msg) = outcome {
                    eprintln!("  run {run}: {msg}");
                }
            }
        }
        let label = match &cell.result {
            Some(r) => format!(
                "median imse {} (mad {}), median auc {} (mad {})",
                r.median_imse, r.mad_imse, r.median_auc, r.mad_auc
            ),
            None => "all runs failed".into(),
        };
        println!(
            "{} @ contamination {}: {label}",
            cell.method.label(),
            cell.level
        );
    }
    if total_failures == 0 {
        println!("all {} runs succeeded in every cell", plan.runs);
    }
    println!("summary written to {}", out.display());
    Ok(())
}
