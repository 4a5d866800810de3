//! Causal isotonic calibration: hold-out and cross-fitted-nuisance
//! calibration of a fixed predictor, pooled and unpooled
//! cross-calibration, the DR-learner base predictor, and median aggregation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_folds, Dataset, FoldAssignment, Observation};
use crate::error::{Error, Result};
use crate::isotonic::{pava_fit, StepFunction, WeightedPoints};
use crate::learners::{LinearModel, StumpEnsemble};
use crate::nuisance::{
    cross_fit_with_models, fit_fold_models, fit_regressor, Clip, LearnerKind, LearnerSpec,
    NuisanceModels, OracleSource, Regressor,
};
use crate::pseudo::compute_pseudo;

/// Which order statistic the pointwise median returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MedianRule {
    /// The `max(1, ⌊k/2⌋)`-th order statistic (1-based).
    #[default]
    #[serde(rename = "floor_k_over_2_clamped")]
    Paper,
    /// The conventional lower median, the `⌈k/2⌉`-th order statistic.
    #[serde(rename = "ceil_k_over_2")]
    Standard,
}

impl MedianRule {
    /// 1-based order-statistic index for `k` values.
    pub fn index(self, k: usize) -> usize {
        match self {
            MedianRule::Paper => (k / 2).max(1),
            MedianRule::Standard => k.div_ceil(2),
        }
    }

    pub fn select(self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::Empty("median input"));
        }
        let mut v = values.to_vec();
        let idx = self.index(v.len()) - 1;
        let (_, nth, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
        Ok(*nth)
    }
}

impl FromStr for MedianRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(MedianRule::Paper),
            "standard" => Ok(MedianRule::Standard),
            other => Err(Error::invalid(format!(
                "unknown median rule `{other}` (expected paper or standard)"
            ))),
        }
    }
}

/// Pointwise median under the default (`⌊k/2⌋`, clamped to 1) rule.
pub fn median_select(values: &[f64]) -> Result<f64> {
    MedianRule::Paper.select(values)
}

/// A treatment-effect predictor `w ↦ τ(w)` to be calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BasePredictor {
    /// Precomputed predictions read from the row's `tau_hat` column.
    Column { column: String },
    Constant { value: f64 },
    Linear(LinearModel),
    BoostedStumps(StumpEnsemble),
    /// The true effect, from the `tau0` column or a simulation design.
    Oracle(OracleSource),
}

impl BasePredictor {
    pub fn tau_hat_column() -> Self {
        BasePredictor::Column {
            column: "tau_hat".into(),
        }
    }

    pub fn predict(&self, obs: &Observation) -> Result<f64> {
        match self {
            BasePredictor::Column { column } => match column.as_str() {
                "tau_hat" => obs.tau_hat.ok_or_else(|| Error::MissingColumn("tau_hat".into())),
                other => Err(Error::invalid(format!("unsupported prediction column `{other}`"))),
            },
            BasePredictor::Constant { value } => Ok(*value),
            BasePredictor::Linear(m) => Ok(m.predict(&obs.w)),
            BasePredictor::BoostedStumps(m) => Ok(m.predict(&obs.w)),
            BasePredictor::Oracle(OracleSource::Columns) => {
                obs.tau0.ok_or_else(|| Error::MissingColumn("tau0".into()))
            }
            BasePredictor::Oracle(OracleSource::Scenario { scenario }) => Ok(scenario.tau0(&obs.w)),
        }
    }

    pub fn predict_all(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        dataset.rows().iter().map(|r| self.predict(r)).collect()
    }

    fn from_regressor(r: Regressor) -> Result<Self> {
        match r {
            Regressor::Constant(value) => Ok(BasePredictor::Constant { value }),
            Regressor::Linear(m) => Ok(BasePredictor::Linear(m)),
            Regressor::BoostedStumps(m) => Ok(BasePredictor::BoostedStumps(m)),
            Regressor::Logistic(_) => Err(Error::UnsupportedLearner {
                learner: "logistic".into(),
                role: "a treatment-effect regression",
            }),
        }
    }
}

/// How a member's base predictor was trained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub learner: String,
    /// 1-based fold left out of training.
    pub held_out_fold: usize,
}

/// `θ ∘ τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPredictor {
    pub theta: StepFunction,
    pub base: BasePredictor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl CalibratedPredictor {
    pub fn predict(&self, obs: &Observation) -> Result<f64> {
        Ok(self.theta.evaluate(self.base.predict(obs)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorKind {
    Holdout,
    CrossfitFixed,
    CrossUnpooled,
    CrossPooled,
}

impl fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibratorKind::Holdout => "holdout",
            CalibratorKind::CrossfitFixed => "crossfit_fixed",
            CalibratorKind::CrossUnpooled => "cross_unpooled",
            CalibratorKind::CrossPooled => "cross_pooled",
        })
    }
}

/// A calibrated predictor with one member (hold-out and cross-fitted
/// nuisance calibration) or `k` members aggregated by a pointwise median
/// (cross-calibration). This is also the persisted JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub kind: CalibratorKind,
    pub members: Vec<CalibratedPredictor>,
    pub median_index_rule: MedianRule,
}

impl Calibrator {
    pub fn predict(&self, obs: &Observation) -> Result<f64> {
        match self.members.as_slice() {
            [] => Err(Error::Empty("calibrator members")),
            [only] => only.predict(obs),
            members => {
                let values = members
                    .iter()
                    .map(|m| m.predict(obs))
                    .collect::<Result<Vec<_>>>()?;
                self.median_index_rule.select(&values)
            }
        }
    }

    pub fn predict_all(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        dataset.rows().iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Calibrator = serde_json::from_str(s)?;
        if c.members.is_empty() {
            return Err(Error::Empty("calibrator members"));
        }
        Ok(c)
    }
}

/// A calibrator together with the `(τ, χ)` pairs each isotonic fit saw.
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    pub calibrator: Calibrator,
    pub isotonic_inputs: Vec<WeightedPoints>,
}

/// Isotonic regression of pseudo-outcomes on the predictions of the
/// calibration rows.
pub fn calibrate_holdout(tau_on_cal: &[f64], chi_on_cal: &[f64]) -> Result<StepFunction> {
    let points = WeightedPoints::unweighted(tau_on_cal.to_vec(), chi_on_cal.to_vec())?;
    pava_fit(&points)
}

/// Sample-split calibration of a fixed predictor: nuisances from `train`,
/// isotonic regression on `cal`.
pub fn calibrate_holdout_split(
    base: BasePredictor,
    train: &Dataset,
    cal: &Dataset,
    pi_spec: &LearnerSpec,
    mu_spec: &LearnerSpec,
    clip: Clip,
) -> Result<CalibrationFit> {
    let models = NuisanceModels::fit(train, pi_spec, mu_spec)?;
    let nf = models.score_rows(cal.rows(), clip)?;
    let chi = compute_pseudo(cal, &nf)?.chi;
    let tau = base.predict_all(cal)?;
    let points = WeightedPoints::unweighted(tau, chi)?;
    let theta = pava_fit(&points)?;
    Ok(CalibrationFit {
        calibrator: Calibrator {
            kind: CalibratorKind::Holdout,
            members: vec![CalibratedPredictor {
                theta,
                base,
                provenance: None,
            }],
            median_index_rule: MedianRule::default(),
        },
        isotonic_inputs: vec![points],
    })
}

/// Calibration of a fixed predictor with cross-fitted pseudo-outcomes and
/// one isotonic fit over all rows.
pub fn calibrate_fixed_crossfit(
    base: BasePredictor,
    dataset: &Dataset,
    folds: &FoldAssignment,
    pi_spec: &LearnerSpec,
    mu_spec: &LearnerSpec,
    clip: Clip,
) -> Result<CalibrationFit> {
    let models = fit_fold_models(dataset, folds, pi_spec, mu_spec)?;
    let nf = cross_fit_with_models(dataset, folds, &models, clip)?;
    let chi = compute_pseudo(dataset, &nf)?.chi;
    let tau = base.predict_all(dataset)?;
    let points = WeightedPoints::unweighted(tau, chi)?;
    let theta = pava_fit(&points)?;
    Ok(CalibrationFit {
        calibrator: Calibrator {
            kind: CalibratorKind::CrossfitFixed,
            members: vec![CalibratedPredictor {
                theta,
                base,
                provenance: None,
            }],
            median_index_rule: MedianRule::default(),
        },
        isotonic_inputs: vec![points],
    })
}

/// Regresses pseudo-outcomes on covariates with `spec`.
fn regress_pseudo(rows: &[&Observation], chi: &[f64], spec: &LearnerSpec) -> Result<BasePredictor> {
    match spec.kind {
        LearnerKind::Oracle(source) => Ok(BasePredictor::Oracle(source)),
        LearnerKind::Logistic => Err(Error::UnsupportedLearner {
            learner: "logistic".into(),
            role: "a treatment-effect regression",
        }),
        _ => BasePredictor::from_regressor(fit_regressor(rows, chi, spec, false)?),
    }
}

/// DR-learner: regress cross-fitted pseudo-outcomes on the covariates.
pub fn dr_learn(
    dataset: &Dataset,
    folds: &FoldAssignment,
    pi_spec: &LearnerSpec,
    mu_spec: &LearnerSpec,
    regressor_spec: &LearnerSpec,
    clip: Clip,
) -> Result<BasePredictor> {
    regressor_spec.validate()?;
    let models = fit_fold_models(dataset, folds, pi_spec, mu_spec)?;
    let nf = cross_fit_with_models(dataset, folds, &models, clip)?;
    let chi = compute_pseudo(dataset, &nf)?.chi;
    let rows: Vec<&Observation> = dataset.rows().iter().collect();
    regress_pseudo(&rows, &chi, regressor_spec)
}

/// Settings shared by both cross-calibration variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCalibrationConfig {
    pub k: usize,
    pub seed: u64,
    pub base_spec: LearnerSpec,
    pub pi_spec: LearnerSpec,
    pub mu_spec: LearnerSpec,
    pub clip: Clip,
    pub median_rule: MedianRule,
}

/// Per-fold pieces: the base predictor trained on the fold's complement and
/// the `(τ, χ)` pairs of the fold's own rows.
struct FoldPiece {
    base: BasePredictor,
    tau: Vec<f64>,
    chi: Vec<f64>,
}

fn fold_pieces(
    dataset: &Dataset,
    folds: &FoldAssignment,
    cfg: &CrossCalibrationConfig,
) -> Result<Vec<FoldPiece>> {
    cfg.base_spec.validate()?;
    let models = fit_fold_models(dataset, folds, &cfg.pi_spec, &cfg.mu_spec)?;
    (0..folds.k())
        .into_par_iter()
        .map(|s| -> Result<FoldPiece> {
            let train = dataset.subset(&folds.complement(s))?;
            let held_out = dataset.subset(&folds.members(s))?;
            let nuisance = &models[s];
            let train_chi = compute_pseudo(&train, &nuisance.score_rows(train.rows(), cfg.clip)?)?;
            let train_rows: Vec<&Observation> = train.rows().iter().collect();
            let base = regress_pseudo(&train_rows, &train_chi.chi, &cfg.base_spec)?;
            let chi = compute_pseudo(&held_out, &nuisance.score_rows(held_out.rows(), cfg.clip)?)?;
            let tau = base.predict_all(&held_out)?;
            Ok(FoldPiece {
                base,
                tau,
                chi: chi.chi,
            })
        })
        .enumerate()
        .map(|(s, r)| r.map_err(|e| e.in_fold(s + 1)))
        .collect()
}

fn provenance(cfg: &CrossCalibrationConfig, s: usize) -> Option<Provenance> {
    Some(Provenance {
        learner: cfg.base_spec.kind.name().to_string(),
        held_out_fold: s + 1,
    })
}

/// Cross-calibration with one isotonic fit per fold.
pub fn cross_calibrate_unpooled(
    dataset: &Dataset,
    cfg: &CrossCalibrationConfig,
) -> Result<CalibrationFit> {
    let folds = split_folds(dataset, cfg.k, cfg.seed)?;
    cross_calibrate_unpooled_with_folds(dataset, &folds, cfg)
}

pub fn cross_calibrate_unpooled_with_folds(
    dataset: &Dataset,
    folds: &FoldAssignment,
    cfg: &CrossCalibrationConfig,
) -> Result<CalibrationFit> {
    let pieces = fold_pieces(dataset, folds, cfg)?;
    let mut members = Vec::with_capacity(pieces.len());
    let mut inputs = Vec::with_capacity(pieces.len());
    for (s, piece) in pieces.into_iter().enumerate() {
        let points = WeightedPoints::unweighted(piece.tau, piece.chi)?;
        let theta = pava_fit(&points).map_err(|e| e.in_fold(s + 1))?;
        members.push(CalibratedPredictor {
            theta,
            base: piece.base,
            provenance: provenance(cfg, s),
        });
        inputs.push(points);
    }
    Ok(CalibrationFit {
        calibrator: Calibrator {
            kind: CalibratorKind::CrossUnpooled,
            members,
            median_index_rule: cfg.median_rule,
        },
        isotonic_inputs: inputs,
    })
}

/// Cross-calibration with a single isotonic fit over the pooled
/// out-of-fold `(τ, χ)` pairs, shared by every member.
pub fn cross_calibrate_pooled(
    dataset: &Dataset,
    cfg: &CrossCalibrationConfig,
) -> Result<CalibrationFit> {
    let folds = split_folds(dataset, cfg.k, cfg.seed)?;
    cross_calibrate_pooled_with_folds(dataset, &folds, cfg)
}

pub fn cross_calibrate_pooled_with_folds(
    dataset: &Dataset,
    folds: &FoldAssignment,
    cfg: &CrossCalibrationConfig,
) -> Result<CalibrationFit> {
    let pieces = fold_pieces(dataset, folds, cfg)?;
    let (mut tau, mut chi) = (Vec::with_capacity(dataset.len()), Vec::with_capacity(dataset.len()));
    for piece in &pieces {
        tau.extend_from_slice(&piece.tau);
        chi.extend_from_slice(&piece.chi);
    }
    let points = WeightedPoints::unweighted(tau, chi)?;
    let theta = pava_fit(&points)?;
    let members = pieces
        .into_iter()
        .enumerate()
        .map(|(s, piece)| CalibratedPredictor {
            theta: theta.clone(),
            base: piece.base,
            provenance: provenance(cfg, s),
        })
        .collect();
    Ok(CalibrationFit {
        calibrator: Calibrator {
            kind: CalibratorKind::CrossPooled,
            members,
            median_index_rule: cfg.median_rule,
        },
        isotonic_inputs: vec![points],
    })
}
