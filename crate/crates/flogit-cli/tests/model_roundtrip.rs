//! The model file contract: save, load, predict must reproduce in-process
//! predictions exactly, and damaged files must be rejected on load.

use flogit::funcsample::{fit_coefficients, RawCurves};
use flogit::logitfit::predict;
use flogit::simgen::{generate, run_rng, SimConfig};
use flogit_cli::commands::{fit_pipeline, Method};
use flogit_cli::errors::CliError;
use flogit_cli::model::{ModelFile, SCHEMA_VERSION};

fn small_dataset() -> (RawCurves, Vec<u8>) {
    let cfg = SimConfig {
        n: 120,
        grid_points: 61,
        n_train: 80,
        contamination: 0.0,
        seed: 11,
        n_runs: 1,
    };
    let mut rng = run_rng(11, 0);
    generate(&cfg, &mut rng).expect("generate")
}

fn fitted_model(method: Method) -> (ModelFile, RawCurves) {
    let (raw, y) = small_dataset();
    let (fit, mode, _) = fit_pipeline(&raw, &y, method, 0.99, Some(8)).expect("fit");
    (ModelFile::from_fit(&fit, mode, raw.n_curves()), raw)
}

#[test]
fn saved_model_reproduces_predictions_bit_for_bit() {
    let (raw, y) = small_dataset();
    for method in [Method::FpcaMl, Method::RfpcaWby] {
        let (fit, mode, _) = fit_pipeline(&raw, &y, method, 0.99, Some(8)).expect("fit");
        let sample = fit_coefficients(&raw, &fit.eigen.basis).expect("coefficients");
        let direct = predict(&fit, &sample).expect("predict");

        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("model.json");
        ModelFile::from_fit(&fit, mode, raw.n_curves())
            .save(&path)
            .expect("save");
        let reloaded = ModelFile::load(&path).expect("load").to_fit().expect("rebuild");
        let replayed = predict(&reloaded, &sample).expect("predict reloaded");

        assert_eq!(direct.len(), replayed.len());
        for (a, b) in direct.iter().zip(&replayed) {
            assert_eq!(a.0.to_bits(), b.0.to_bits(), "probability drifted through the file");
            assert_eq!(a.1, b.1);
        }
    }
}

#[test]
fn model_json_round_trips_byte_for_byte() {
    let (file, _) = fitted_model(Method::RfpcaWby);
    let dir = tempfile::tempdir().expect("tempdir");
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    file.save(&first).expect("save");
    ModelFile::load(&first)
        .expect("load")
        .save(&second)
        .expect("save again");
    let a = std::fs::read(&first).expect("read a");
    let b = std::fs::read(&second).expect("read b");
    assert_eq!(a, b);
}

#[test]
fn rebuilt_knots_match_the_saved_ones_exactly() {
    let (file, _) = fitted_model(Method::FpcaMl);
    let rebuilt = flogit::bspline::BSplineBasis::new(file.domain, file.num_basis).expect("basis");
    assert_eq!(rebuilt.knots().len(), file.knots.len());
    for (a, b) in rebuilt.knots().iter().zip(&file.knots) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn foreign_schema_versions_are_rejected() {
    let (mut file, _) = fitted_model(Method::FpcaMl);
    file.schema_version = SCHEMA_VERSION + 1;
    assert!(matches!(file.to_fit(), Err(CliError::Parse(_))));
}

#[test]
fn tampered_knots_are_rejected() {
    let (mut file, _) = fitted_model(Method::FpcaMl);
    let mid = file.knots.len() / 2;
    file.knots[mid] += 1e-9;
    assert!(matches!(file.to_fit(), Err(CliError::Parse(_))));
}

#[test]
fn inconsistent_shapes_are_rejected() {
    let (file, _) = fitted_model(Method::RfpcaWby);

    let mut short_eigenvalues = file.clone();
    short_eigenvalues.eigenvalues.pop();
    assert!(matches!(short_eigenvalues.to_fit(), Err(CliError::Parse(_))));

    let mut ragged_directions = file.clone();
    ragged_directions.directions[0].pop();
    assert!(matches!(ragged_directions.to_fit(), Err(CliError::Parse(_))));

    let mut long_theta = file.clone();
    long_theta.theta.push(0.0);
    assert!(matches!(long_theta.to_fit(), Err(CliError::Parse(_))));
}

#[test]
fn unknown_labels_are_rejected() {
    let (file, _) = fitted_model(Method::FpcaMl);

    let mut bad_center = file.clone();
    bad_center.center_mode = "midpoint".into();
    assert!(matches!(bad_center.to_fit(), Err(CliError::Parse(_))));

    let mut bad_method = file.clone();
    bad_method.fpca_method = "kernel".into();
    assert!(matches!(bad_method.to_fit(), Err(CliError::Parse(_))));

    let mut bad_estimator = file.clone();
    bad_estimator.estimator = "probit".into();
    assert!(matches!(bad_estimator.to_fit(), Err(CliError::Parse(_))));
}
