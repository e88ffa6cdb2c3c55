//! Families of points over a rational parameter and the empirical sweeps run on
//! them: the height inequality, the Silverman–Tate comparison and the
//! specialization limit. Runs are persisted as one JSON document plus a CSV of
//! records.

mod family;
mod runs;

pub use family::{
    builtin_family_x2, identity_family, parse_rational, parse_samples, two_torsion_family,
    ComponentSpec, FamilySpec, RationalFunction,
};
pub use runs::{
    evaluate_sample, run_height_inequality, run_silverman_tate, run_specialization_ratio, sweep,
    write_run, HeightInequalityRun, Run, RunConfig, RunParameters, RunRecord, SilvermanTateRun,
    SkippedSample, SpecializationRun,
};

use thiserror::Error;

use crate::heights::HeightError;
use crate::legendre::CurveError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("malformed family: {0}")]
    Shape(String),
    #[error("family is undefined at t = {0}")]
    Undefined(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Height(#[from] HeightError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Whether the failure is numerical rather than bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, ExperimentError::Height(HeightError::NonConvergence { .. }))
    }
}
