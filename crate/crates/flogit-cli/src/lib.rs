//! Command-line front end for the functional logistic regression pipeline:
//! strict CSV plumbing, a schema-versioned model file, and the Monte-Carlo
//! driver behind the `mc` subcommand. The binary in `main.rs` is a thin
//! argument-parsing shell over this library so the test suites can call the
//! same code paths in process.

pub mod commands;
pub mod errors;
pub mod io;
pub mod model;
