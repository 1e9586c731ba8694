//! Command-line front end: simulate datasets, fit functional logistic
//! models, predict from saved models, and run the Monte Carlo study.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flogit_cli::commands::{self, McPlan, Method};
use flogit_cli::errors::CliError;

#[derive(Parser)]
#[command(
    name = "flogit",
    about = "Robust functional logistic regression: simulate, fit, predict, and benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset as CSV files.
    Simulate {
        /// Number of curves.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Number of equally spaced observation points on [0, 1].
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Size of the leading block that contamination may touch.
        #[arg(long, default_value_t = 700)]
        n_train: usize,
        /// Fraction of the training block replaced by outliers, in [0, 0.5).
        #[arg(long, default_value_t = 0.0)]
        contamination: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes {out}_curves.csv and {out}_responses.csv.
        #[arg(long)]
        out: String,
    },
    /// Fit a functional logistic model from curves and binary responses.
    Fit {
        /// Curves CSV: header row of grid values, one row per observation.
        #[arg(long)]
        curves: PathBuf,
        /// Response CSV: one 0/1 label per line.
        #[arg(long)]
        response: PathBuf,
        /// fpca-ml (mean centering, classical components, maximum
        /// likelihood) or rfpca-wby (L1-median centering, projection
        /// pursuit components, weighted bounded-deviance fit).
        #[arg(long)]
        method: String,
        /// Keep components until this fraction of variance is explained.
        #[arg(long, default_value_t = 0.99)]
        var_threshold: f64,
        /// Number of basis functions; chosen automatically when omitted.
        #[arg(long)]
        num_basis: Option<usize>,
        /// Accepted for interface stability; fitting is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Path for the JSON model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score new curves with a saved model.
    Predict {
        /// JSON model file written by fit.
        #[arg(long)]
        model: PathBuf,
        /// Curves CSV on the model's domain.
        #[arg(long)]
        curves: PathBuf,
        /// Output CSV with index, probability, class.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the seeded Monte Carlo study and write a summary CSV.
    Mc {
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = 700)]
        n_train: usize,
        /// Comma-separated contamination levels, each in [0, 0.5).
        #[arg(long, default_value = "0,0.01,0.05,0.1,0.2")]
        contamination_list: String,
        /// Comma-separated subset of {fpca-ml, rfpca-wby}.
        #[arg(long, default_value = "fpca-ml,rfpca-wby")]
        methods: String,
        #[arg(long, default_value_t = 0.99)]
        var_threshold: f64,
        /// Number of basis functions; swept automatically when omitted.
        #[arg(long)]
        num_basis: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to all cores. Results are identical
        /// for any value.
        #[arg(long)]
        threads: Option<usize>,
        /// Path for the summary CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-run CSV (method, contamination, run, imse, auc,
        /// status).
        #[arg(long)]
        runs_out: Option<PathBuf>,
        /// Optional wall-time CSV; times vary between machines and runs.
        #[arg(long)]
        times_out: Option<PathBuf>,
    },
}

fn parse_levels(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad contamination level {s:?}")))
        })
        .collect()
}

fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Method::parse)
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            n,
            grid,
            n_train,
            contamination,
            seed,
            out,
        } => commands::cmd_simulate(n, grid, n_train, contamination, seed, &out),
        Command::Fit {
            curves,
            response,
            method,
            var_threshold,
            num_basis,
            seed: _,
            out,
        } => commands::cmd_fit(
            &curves,
            &response,
            Method::parse(&method)?,
            var_threshold,
            num_basis,
            &out,
        ),
        Command::Predict { model, curves, out } => commands::cmd_predict(&model, &curves, &out),
        Command::Mc {
            runs,
            n,
            grid,
            n_train,
            contamination_list,
            methods,
            var_threshold,
            num_basis,
            seed,
            threads,
            out,
            runs_out,
            times_out,
        } => {
            let plan = McPlan {
                runs,
                n,
                grid_points: grid,
                n_train,
                levels: parse_levels(&contamination_list)?,
                methods: parse_methods(&methods)?,
                var_threshold,
                num_basis,
                seed,
                threads,
            };
            commands::cmd_mc(&plan, &out, runs_out.as_deref(), times_out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
