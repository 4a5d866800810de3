//! Causal isotonic calibration of treatment-effect predictors.
//!
//! Doubly-robust pseudo-outcomes, isotonic calibrators (hold-out,
//! cross-fitted and cross-calibrated), calibration metrics and a simulation
//! harness with two reference data-generating scenarios.

pub mod calibrate;
pub mod cli;
pub mod data;
pub mod error;
pub mod isotonic;
pub mod learners;
pub mod metrics;
pub mod nuisance;
pub mod pseudo;
pub mod rng;
pub mod simulate;

pub use calibrate::{
    calibrate_fixed_crossfit, calibrate_holdout, calibrate_holdout_split, cross_calibrate_pooled,
    cross_calibrate_unpooled, dr_learn, BasePredictor, Calibrator, CalibratorKind,
    CrossCalibrationConfig, MedianRule,
};
pub use data::{load_csv, save_csv, CsvOptions, Dataset, FoldAssignment, Observation};
pub use error::{Error, Result};
pub use isotonic::{pava_fit, StepFunction, WeightedPoints};
pub use nuisance::{cross_fit_nuisances, Clip, LearnerKind, LearnerSpec, NuisanceFit};
pub use pseudo::{compute_pseudo, pseudo_outcome, PseudoOutcomes};
pub use simulate::{run_replicates, Scenario, SimConfig};
