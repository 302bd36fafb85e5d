//! Ground states of nonlinear Schrödinger equations with periodic-plus-localized
//! potentials and sign-changing nonlinearities, computed by minimizing the
//! energy over the Nehari manifold.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod manifest;
pub mod minimizer;
pub mod model;
pub mod nehari;
pub mod presets;
pub mod problem;
pub mod spectrum;

pub use error::{NlsError, Result};
pub use config::{parse_config, RunConfig, RunSetup};
pub use grid::{Field, Grid, GridSpec};
pub use minimizer::{solve_ground_state, Init, SolveReport, SolverOptions};
pub use model::{Model, NonlinearitySpec, PeriodicProfile, PotentialSpec, SampledModel};
pub use problem::{CertifyOptions, Problem};
pub use spectrum::SpectrumReport;
