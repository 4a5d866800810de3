//! Propensity and outcome-regression learners, propensity clipping, and
//! cross-fitting of both nuisances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldAssignment, Observation};
use crate::error::{Error, Result};
use crate::learners::{
    fit_boosted_stumps, fit_boosted_stumps_logistic, fit_linear, fit_logistic, LinearModel,
    LogisticModel, StumpEnsemble,
};
use crate::simulate::Scenario;

/// Where an oracle learner reads true nuisance values from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum OracleSource {
    /// The `pi0` / `tau0` columns of each row. Has no outcome regression.
    Columns,
    /// Closed-form functions of a simulation design.
    Scenario { scenario: Scenario },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Logistic,
    Linear,
    BoostedStumps,
    ConstantMean,
    Oracle(OracleSource),
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::Linear => "linear",
            LearnerKind::BoostedStumps => "boosted_stumps",
            LearnerKind::ConstantMean => "constant",
            LearnerKind::Oracle(_) => "oracle",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    /// `oracle` parses to the column-backed oracle.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LearnerKind::Logistic),
            "linear" => Ok(LearnerKind::Linear),
            "boosted_stumps" => Ok(LearnerKind::BoostedStumps),
            "constant" | "constant_mean" => Ok(LearnerKind::ConstantMean),
            "oracle" => Ok(LearnerKind::Oracle(OracleSource::Columns)),
            other => Err(Error::invalid(format!("unknown learner `{other}`"))),
        }
    }
}

/// Outcome family for `linear` outcome fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutcomeFamily {
    /// Logistic when every outcome is 0 or 1, least squares otherwise.
    #[default]
    Auto,
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Boosting rounds.
    pub rounds: usize,
    pub learning_rate: f64,
    /// Ridge penalty on slopes for linear and logistic fits.
    pub ridge: f64,
    /// Newton iteration cap for logistic fits.
    pub max_iter: usize,
    /// Gradient tolerance (per observation) for logistic fits.
    pub tol: f64,
    pub family: OutcomeFamily,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            rounds: 100,
            learning_rate: 0.1,
            ridge: 1e-6,
            max_iter: 50,
            tol: 1e-10,
            family: OutcomeFamily::Auto,
        }
    }

    pub fn logistic() -> Self {
        Self::new(LearnerKind::Logistic)
    }

    pub fn linear() -> Self {
        Self::new(LearnerKind::Linear)
    }

    pub fn constant() -> Self {
        Self::new(LearnerKind::ConstantMean)
    }

    pub fn boosted_stumps(rounds: usize, learning_rate: f64) -> Self {
        LearnerSpec {
            rounds,
            learning_rate,
            ..Self::new(LearnerKind::BoostedStumps)
        }
    }

    pub fn oracle(source: OracleSource) -> Self {
        Self::new(LearnerKind::Oracle(source))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("boosting rounds must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge penalty must be >= 0, got {}", self.ridge)));
        }
        if self.max_iter == 0 || self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("logistic fits need max_iter >= 1 and tol > 0"));
        }
        Ok(())
    }

    fn is_data_driven(&self) -> bool {
        !matches!(self.kind, LearnerKind::Oracle(_))
    }
}

/// Propensity clipping bounds `0 < lo < hi < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    lo: f64,
    hi: f64,
}

impl Clip {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::invalid(format!(
                "clip bounds must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
        Ok(Clip { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn apply(&self, p: f64) -> f64 {
        p.clamp(self.lo, self.hi)
    }
}

impl Default for Clip {
    fn default() -> Self {
        Clip { lo: 0.01, hi: 0.99 }
    }
}

impl FromStr for Clip {
    type Err = Error;

    /// Parses `lo,hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("clip must be `lo,hi`, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad clip bound `{v}`")))
        };
        Clip::new(parse(lo)?, parse(hi)?)
    }
}

/// A fitted univariate-response model of the covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Constant(f64),
    Linear(LinearModel),
    Logistic(LogisticModel),
    BoostedStumps(StumpEnsemble),
}

impl Regressor {
    pub fn predict(&self, w: &[f64]) -> f64 {
        match self {
            Regressor::Constant(v) => *v,
            Regressor::Linear(m) => m.predict(w),
            Regressor::Logistic(m) => m.predict(w),
            Regressor::BoostedStumps(m) => m.predict(w),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Regressor::Logistic(m) => m.converged,
            _ => true,
        }
    }
}

pub(crate) fn design<'a>(rows: &[&'a Observation]) -> Vec<&'a [f64]> {
    rows.iter().map(|r| r.w.as_slice()).collect()
}

fn is_binary(y: &[f64]) -> bool {
    y.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Fits a regression of `y` on the covariates of `rows` with a data-driven
/// learner. `binomial` selects logistic fits for the `linear` kind and
/// logistic boosting for `boosted_stumps`.
pub(crate) fn fit_regressor(
    rows: &[&Observation],
    y: &[f64],
    spec: &LearnerSpec,
    binomial: bool,
) -> Result<Regressor> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let x = design(rows);
    Ok(match spec.kind {
        LearnerKind::ConstantMean => Regressor::Constant(y.iter().sum::<f64>() / y.len() as f64),
        LearnerKind::Linear if !binomial => Regressor::Linear(fit_linear(&x, y, spec.ridge)?),
        LearnerKind::Linear | LearnerKind::Logistic => {
            Regressor::Logistic(fit_logistic(&x, y, spec.ridge, spec.max_iter, spec.tol)?)
        }
        LearnerKind::BoostedStumps if binomial => Regressor::BoostedStumps(
            fit_boosted_stumps_logistic(&x, y, spec.rounds, spec.learning_rate)?,
        ),
        LearnerKind::BoostedStumps => {
            Regressor::BoostedStumps(fit_boosted_stumps(&x, y, spec.rounds, spec.learning_rate)?)
        }
        LearnerKind::Oracle(_) => {
            return Err(Error::UnsupportedLearner {
                learner: "oracle".into(),
                role: "a data-driven regression",
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    Fitted(Regressor),
    Oracle(OracleSource),
}

impl PropensityModel {
    /// Unclipped `P(A = 1 | W = w)` for this row.
    pub fn predict(&self, obs: &Observation) -> Result<f64> {
        match self {
            PropensityModel::Fitted(m) => Ok(m.predict(&obs.w)),
            PropensityModel::Oracle(OracleSource::Columns) => {
                obs.pi0.ok_or_else(|| Error::MissingColumn("pi0".into()))
            }
            PropensityModel::Oracle(OracleSource::Scenario { scenario }) => {
                Ok(scenario.pi0(&obs.w))
            }
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            PropensityModel::Fitted(m) => m.converged(),
            PropensityModel::Oracle(_) => true,
        }
    }
}

/// Fits `w ↦ P(A = 1 | W = w)`.
pub fn fit_propensity(train: &Dataset, spec: &LearnerSpec) -> Result<PropensityModel> {
    spec.validate()?;
    if let LearnerKind::Oracle(source) = spec.kind {
        return Ok(PropensityModel::Oracle(source));
    }
    let labels: Vec<f64> = train.rows().iter().map(|r| f64::from(r.a)).collect();
    if spec.kind == LearnerKind::ConstantMean {
        return Ok(PropensityModel::Fitted(Regressor::Constant(
            labels.iter().sum::<f64>() / labels.len() as f64,
        )));
    }
    if spec.kind == LearnerKind::Linear {
        return Err(Error::UnsupportedLearner {
            learner: "linear".into(),
            role: "the propensity score",
        });
    }
    let treated = train.treated_count();
    if treated == 0 {
        return Err(Error::MissingArm("treated"));
    }
    if treated == train.len() {
        return Err(Error::MissingArm("control"));
    }
    let rows: Vec<&Observation> = train.rows().iter().collect();
    Ok(PropensityModel::Fitted(fit_regressor(&rows, &labels, spec, true)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    PerArm { control: Regressor, treated: Regressor },
    Oracle(Scenario),
}

impl OutcomeModel {
    /// `μ(a, w)` for the row's covariates.
    pub fn predict(&self, a: u8, w: &[f64]) -> f64 {
        match self {
            OutcomeModel::PerArm { control, treated } => {
                if a == 1 {
                    treated.predict(w)
                } else {
                    control.predict(w)
                }
            }
            OutcomeModel::Oracle(s) => s.mu0(a, w),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            OutcomeModel::PerArm { control, treated } => control.converged() && treated.converged(),
            OutcomeModel::Oracle(_) => true,
        }
    }
}

/// Fits `(a, w) ↦ E(Y | A = a, W = w)` as one model per treatment arm.
pub fn fit_outcome(train: &Dataset, spec: &LearnerSpec) -> Result<OutcomeModel> {
    spec.validate()?;
    match spec.kind {
        LearnerKind::Oracle(OracleSource::Scenario { scenario }) => {
            return Ok(OutcomeModel::Oracle(scenario))
        }
        LearnerKind::Oracle(OracleSource::Columns) => {
            return Err(Error::UnsupportedLearner {
                learner: "oracle (columns)".into(),
                role: "the outcome regression; name a simulation scenario instead",
            })
        }
        _ => {}
    }
    let y = train.outcomes();
    let binary = is_binary(&y);
    let binomial = match (spec.kind, spec.family) {
        (LearnerKind::Logistic, _) | (_, OutcomeFamily::Binomial) => {
            if !binary {
                return Err(Error::invalid("binomial outcome fit needs a 0/1 outcome"));
            }
            true
        }
        (_, OutcomeFamily::Gaussian) => false,
        (_, OutcomeFamily::Auto) => binary,
    };
    let mut arms = [Vec::new(), Vec::new()];
    for row in train.rows() {
        arms[usize::from(row.a)].push(row);
    }
    let fit_arm = |arm: usize| -> Result<Regressor> {
        let rows = &arms[arm];
        if rows.is_empty() {
            return Err(Error::MissingArm(if arm == 1 { "treated" } else { "control" }));
        }
        let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
        // an arm with a single outcome value cannot support a logistic fit
        let binomial = binomial && y.iter().any(|&v| v != y[0]);
        if binomial || spec.kind != LearnerKind::Logistic {
            fit_regressor(rows, &y, spec, binomial)
        } else {
            Ok(Regressor::Constant(y[0]))
        }
    };
    Ok(OutcomeModel::PerArm {
        control: fit_arm(0)?,
        treated: fit_arm(1)?,
    })
}

/// A propensity model and an outcome model trained on the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceModels {
    pub propensity: PropensityModel,
    pub outcome: OutcomeModel,
}

impl NuisanceModels {
    pub fn fit(train: &Dataset, pi_spec: &LearnerSpec, mu_spec: &LearnerSpec) -> Result<Self> {
        Ok(NuisanceModels {
            propensity: fit_propensity(train, pi_spec)?,
            outcome: fit_outcome(train, mu_spec)?,
        })
    }

    /// Clipped propensity and both arm regressions for one row.
    pub fn score(&self, obs: &Observation, clip: Clip) -> Result<(f64, f64, f64)> {
        let pi = clip.apply(self.propensity.predict(obs)?);
        let mu0 = self.outcome.predict(0, &obs.w);
        let mu1 = self.outcome.predict(1, &obs.w);
        if !(pi.is_finite() && mu0.is_finite() && mu1.is_finite()) {
            return Err(Error::NonFinite("nuisance predictions"));
        }
        Ok((pi, mu0, mu1))
    }

    pub fn score_rows<'a, I>(&self, rows: I, clip: Clip) -> Result<NuisanceFit>
    where
        I: IntoIterator<Item = &'a Observation>,
    {
        let mut fit = NuisanceFit::empty(clip);
        for obs in rows {
            let (pi, mu0, mu1) = self.score(obs, clip)?;
            fit.pi_hat.push(pi);
            fit.mu0_hat.push(mu0);
            fit.mu1_hat.push(mu1);
        }
        fit.converged = self.converged();
        Ok(fit)
    }

    pub fn converged(&self) -> bool {
        self.propensity.converged() && self.outcome.converged()
    }
}

/// Per-row nuisance values aligned with a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceFit {
    pub pi_hat: Vec<f64>,
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub clip: Clip,
    /// False if any logistic fit stopped at its iteration cap.
    pub converged: bool,
}

impl NuisanceFit {
    fn empty(clip: Clip) -> Self {
        NuisanceFit {
            pi_hat: Vec::new(),
            mu0_hat: Vec::new(),
            mu1_hat: Vec::new(),
            clip,
            converged: true,
        }
    }

    pub fn len(&self) -> usize {
        self.pi_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi_hat.is_empty()
    }
}

/// Models fitted on the complement of each fold, in fold order.
pub fn fit_fold_models(
    dataset: &Dataset,
    folds: &FoldAssignment,
    pi_spec: &LearnerSpec,
    mu_spec: &LearnerSpec,
) -> Result<Vec<NuisanceModels>> {
    check_folds(dataset, folds)?;
    (0..folds.k())
        .into_par_iter()
        .map(|s| {
            let train = dataset.subset(&folds.complement(s))?;
            check_arms(&train, pi_spec, mu_spec)?;
            NuisanceModels::fit(&train, pi_spec, mu_spec)
        })
        .enumerate()
        .map(|(s, r)| r.map_err(|e| e.in_fold(s + 1)))
        .collect()
}

pub(crate) fn check_folds(dataset: &Dataset, folds: &FoldAssignment) -> Result<()> {
    if folds.n() != dataset.len() {
        return Err(Error::LengthMismatch {
            context: "fold assignment",
            expected: dataset.len(),
            actual: folds.n(),
        });
    }
    Ok(())
}

fn check_arms(train: &Dataset, pi_spec: &LearnerSpec, mu_spec: &LearnerSpec) -> Result<()> {
    if !(pi_spec.is_data_driven() || mu_spec.is_data_driven()) {
        return Ok(());
    }
    let treated = train.treated_count();
    if treated == 0 {
        return Err(Error::MissingArm("treated"));
    }
    if treated == train.len() {
        return Err(Error::MissingArm("control"));
    }
    Ok(())
}

/// Scores every row with models trained without its fold.
pub fn cross_fit_nuisances(
    dataset: &Dataset,
    folds: &FoldAssignment,
    pi_spec: &LearnerSpec,
    mu_spec: &LearnerSpec,
    clip: Clip,
) -> Result<NuisanceFit> {
    let models = fit_fold_models(dataset, folds, pi_spec, mu_spec)?;
    cross_fit_with_models(dataset, folds, &models, clip)
}

pub(crate) fn cross_fit_with_models(
    dataset: &Dataset,
    folds: &FoldAssignment,
    models: &[NuisanceModels],
    clip: Clip,
) -> Result<NuisanceFit> {
    let mut fit = NuisanceFit::empty(clip);
    for (i, obs) in dataset.rows().iter().enumerate() {
        let s = folds.fold_of(i);
        let (pi, mu0, mu1) = models[s].score(obs, clip).map_err(|e| e.in_fold(s + 1))?;
        fit.pi_hat.push(pi);
        fit.mu0_hat.push(mu0);
        fit.mu1_hat.push(mu1);
    }
    fit.converged = models.iter().all(NuisanceModels::converged);
    Ok(fit)
}
