//! Data-generating scenarios and the Monte-Carlo replicate runner.

mod scenario;

pub use scenario::*;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{
    cross_calibrate_pooled_with_folds, cross_calibrate_unpooled_with_folds, dr_learn,
    CrossCalibrationConfig, MedianRule,
};
use crate::data::{split_folds, OptionalColumn};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_predictions, ite_variance, CalibrationReport, GammaHatConfig};
use crate::nuisance::{Clip, LearnerSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossVariant {
    #[default]
    Pooled,
    Unpooled,
}

impl std::str::FromStr for CrossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(CrossVariant::Pooled),
            "unpooled" => Ok(CrossVariant::Unpooled),
            other => Err(Error::invalid(format!(
                "unknown variant `{other}` (expected pooled or unpooled)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub reps: usize,
    pub k: usize,
    pub master_seed: u64,
    pub base_spec: LearnerSpec,
    pub pi_spec: LearnerSpec,
    pub mu_spec: LearnerSpec,
    pub gamma: GammaHatConfig,
    pub eval_n: usize,
    pub variant: CrossVariant,
    pub clip: Clip,
    pub median_rule: MedianRule,
    /// Monte-Carlo draws for the `Var(Y(1) - Y(0))` standardizer.
    pub standardizer_draws: usize,
}

impl SimConfig {
    pub fn new(scenario: Scenario, n: usize, reps: usize, master_seed: u64) -> Self {
        SimConfig {
            scenario,
            n,
            reps,
            k: 5,
            master_seed,
            base_spec: LearnerSpec::boosted_stumps(100, 0.1),
            pi_spec: LearnerSpec::logistic(),
            mu_spec: LearnerSpec::boosted_stumps(100, 0.1),
            gamma: GammaHatConfig::default(),
            eval_n: 10_000,
            variant: CrossVariant::Pooled,
            clip: Clip::default(),
            median_rule: MedianRule::default(),
            standardizer_draws: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {}", self.k)));
        }
        if self.n < 4 * self.k {
            return Err(Error::invalid(format!(
                "n = {} is too small for {} folds (need n >= {})",
                self.n,
                self.k,
                4 * self.k
            )));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.eval_n < 1000 {
            return Err(Error::invalid(format!(
                "evaluation sample size must be at least 1000, got {}",
                self.eval_n
            )));
        }
        for spec in [&self.base_spec, &self.pi_spec, &self.mu_spec] {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Runs every replicate and returns two report rows per replicate
/// (uncalibrated then calibrated), ordered by replicate.
pub fn run_replicates(cfg: &SimConfig) -> Result<Vec<CalibrationReport>> {
    cfg.validate()?;
    let standardizer = ite_variance(&cfg.scenario, cfg.standardizer_draws, cfg.master_seed)?;
    let per_rep: Vec<Vec<CalibrationReport>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            run_one(cfg, r, standardizer).map_err(|e| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

fn run_one(cfg: &SimConfig, r: usize, standardizer: f64) -> Result<Vec<CalibrationReport>> {
    let mut rng = rng::replicate_stream(cfg.master_seed, r);
    let train = cfg.scenario.generate(cfg.n, &mut rng)?;
    let eval = cfg.scenario.generate(cfg.eval_n, &mut rng)?;
    let gamma_sample = cfg.scenario.generate(cfg.eval_n, &mut rng)?;
    let split_seed = rng.next_u64();

    let folds = split_folds(&train, cfg.k, split_seed)?;
    let uncalibrated = dr_learn(&train, &folds, &cfg.pi_spec, &cfg.mu_spec, &cfg.base_spec, cfg.clip)?;
    let cc = CrossCalibrationConfig {
        k: cfg.k,
        seed: split_seed,
        base_spec: cfg.base_spec,
        pi_spec: cfg.pi_spec,
        mu_spec: cfg.mu_spec,
        clip: cfg.clip,
        median_rule: cfg.median_rule,
    };
    let calibrated = match cfg.variant {
        CrossVariant::Pooled => cross_calibrate_pooled_with_folds(&train, &folds, &cc)?,
        CrossVariant::Unpooled => cross_calibrate_unpooled_with_folds(&train, &folds, &cc)?,
    }
    .calibrator;

    let eval_truth = eval.column(OptionalColumn::Tau0)?;
    let gamma_truth = gamma_sample.column(OptionalColumn::Tau0)?;
    let estimator = format!("dr_{}", cfg.base_spec.kind.name());
    let mut rows = Vec::with_capacity(2);
    for is_calibrated in [false, true] {
        let (eval_pred, gamma_pred) = if is_calibrated {
            (calibrated.predict_all(&eval)?, calibrated.predict_all(&gamma_sample)?)
        } else {
            (uncalibrated.predict_all(&eval)?, uncalibrated.predict_all(&gamma_sample)?)
        };
        let m = evaluate_predictions(
            &eval_pred,
            &eval_truth,
            &gamma_pred,
            &gamma_truth,
            &cfg.gamma,
            split_seed,
        )?;
        rows.push(CalibrationReport {
            estimator: estimator.clone(),
            calibrated: is_calibrated,
            n: cfg.n,
            replicate: r,
            cal: m.cal,
            mse: m.mse,
            dis: m.dis,
            bias_lower: m.bias_lower,
            bias_upper: m.bias_upper,
            standardizer: Some(standardizer),
            seed: cfg.master_seed,
        });
    }
    Ok(rows)
}
