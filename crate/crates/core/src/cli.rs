//! Command-line interface: argument definitions and subcommand drivers.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::calibrate::{
    calibrate_fixed_crossfit, calibrate_holdout_split, cross_calibrate_pooled_with_folds,
    cross_calibrate_unpooled_with_folds, BasePredictor, Calibrator, CrossCalibrationConfig,
    MedianRule,
};
use crate::data::{load_csv, save_csv, split_folds, CsvOptions, Dataset, FoldAssignment, OptionalColumn};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_predictions, ite_variance, write_reports, CalibrationReport, GammaHatConfig,
};
use crate::nuisance::{cross_fit_nuisances, Clip, LearnerKind, LearnerSpec, OracleSource, OutcomeFamily};
use crate::pseudo::compute_pseudo;
use crate::rng;
use crate::simulate::{run_replicates, CrossVariant, Scenario, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "isocal", version, about = "Causal isotonic calibration of treatment-effect predictors")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate a fixed predictor given by the `tau_hat` column.
    Calibrate(CalibrateArgs),
    /// Fit a base learner and calibrate it by cross-calibration.
    CrossCalibrate(CrossCalibrateArgs),
    /// Run Monte-Carlo replicates on a simulation scenario.
    Simulate(SimulateArgs),
    /// Compute calibration metrics of a prediction column against `tau0`.
    Evaluate(EvaluateArgs),
    /// Write a simulated dataset with its oracle columns.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Seed for every random choice; required by randomized subcommands.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of cross-fitting folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Propensity clipping bounds `lo,hi`.
    #[arg(long, default_value = "0.01,0.99")]
    pub clip: String,
    #[arg(long, value_enum, default_value_t = MedianArg::Paper)]
    pub median_rule: MedianArg,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Ignore unknown CSV columns instead of failing.
    #[arg(long)]
    pub allow_extra_columns: bool,
    /// File of `key = value` lines supplying defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MedianArg {
    /// The `max(1, ⌊k/2⌋)`-th order statistic.
    Paper,
    /// The `⌈k/2⌉`-th order statistic.
    Standard,
}

impl From<MedianArg> for MedianRule {
    fn from(m: MedianArg) -> Self {
        match m {
            MedianArg::Paper => MedianRule::Paper,
            MedianArg::Standard => MedianRule::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Auto,
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    /// logistic, boosted_stumps, constant or oracle.
    #[arg(long, default_value = "logistic")]
    pub pi_learner: String,
    /// linear, boosted_stumps, constant or oracle.
    #[arg(long, default_value = "boosted_stumps")]
    pub mu_learner: String,
    #[arg(long, default_value_t = 100)]
    pub boost_rounds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub boost_rate: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub ridge: f64,
    /// Outcome family for the outcome regression.
    #[arg(long, value_enum, default_value_t = FamilyArg::Auto)]
    pub outcome_family: FamilyArg,
    /// Oracle learners use the closed-form functions of this scenario
    /// instead of the `pi0`/`tau0` columns.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub oracle_scenario: Option<u32>,
}

impl LearnerArgs {
    fn spec(&self, name: &str, scenario: Option<Scenario>) -> Result<LearnerSpec> {
        let mut kind: LearnerKind = name.parse()?;
        if let (LearnerKind::Oracle(_), Some(scenario)) = (kind, scenario) {
            kind = LearnerKind::Oracle(OracleSource::Scenario { scenario });
        }
        let spec = LearnerSpec {
            rounds: self.boost_rounds,
            learning_rate: self.boost_rate,
            ridge: self.ridge,
            family: match self.outcome_family {
                FamilyArg::Auto => OutcomeFamily::Auto,
                FamilyArg::Gaussian => OutcomeFamily::Gaussian,
                FamilyArg::Binomial => OutcomeFamily::Binomial,
            },
            ..LearnerSpec::new(kind)
        };
        spec.validate()?;
        Ok(spec)
    }

    fn oracle_scenario(&self, d: usize) -> Result<Option<Scenario>> {
        self.oracle_scenario.map(|id| Scenario::from_id(id, d)).transpose()
    }
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub learners: LearnerArgs,
    /// Single input for cross-fitted nuisances (uses its `fold` column when
    /// present, otherwise a seeded split into `--folds` folds).
    #[arg(long, conflicts_with_all = ["train", "cal"])]
    pub input: Option<PathBuf>,
    /// Nuisance training file for sample-split calibration.
    #[arg(long, requires = "cal")]
    pub train: Option<PathBuf>,
    /// Calibration file for sample-split calibration.
    #[arg(long, requires = "train")]
    pub cal: Option<PathBuf>,
    /// Extra file (with `tau_hat`) to score with the fitted calibrator.
    #[arg(long)]
    pub score: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CrossCalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub learners: LearnerArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Pooled)]
    pub variant: VariantArg,
    /// linear, boosted_stumps, constant or oracle.
    #[arg(long, default_value = "boosted_stumps")]
    pub base_learner: String,
    /// File to score with the fitted calibrator.
    #[arg(long)]
    pub score: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Pooled,
    Unpooled,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub scenario: u32,
    /// Covariate count for scenario 2.
    #[arg(long, default_value_t = 100)]
    pub d_total: usize,
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<Scenario> {
        Scenario::from_id(self.scenario, self.d_total)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub learners: LearnerArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub eval_n: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Pooled)]
    pub variant: VariantArg,
    #[arg(long, default_value = "boosted_stumps")]
    pub base_learner: String,
    /// Candidate bin counts for the calibration-function estimate.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,50")]
    pub gamma_bins: Vec<usize>,
    /// Monte-Carlo draws for the ITE-variance standardizer.
    #[arg(long, default_value_t = 100_000)]
    pub standardizer_draws: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub learners: LearnerArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Column to evaluate: `tau_hat` or `tau_cal` (default: `tau_cal` when
    /// present, else `tau_hat`).
    #[arg(long)]
    pub column: Option<String>,
    /// Score the input with a saved calibrator instead of reading a column.
    #[arg(long, conflicts_with = "column")]
    pub calibrator: Option<PathBuf>,
    /// Independent sample for the calibration-function estimate (defaults
    /// to the input itself).
    #[arg(long)]
    pub gamma_input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,50")]
    pub gamma_bins: Vec<usize>,
    /// Known `Var(Y(1) - Y(0))` to report alongside the metrics.
    #[arg(long)]
    pub standardizer: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub standardizer_draws: usize,
    /// Name written to the `estimator` column.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Also write the input with cross-fitted pseudo-outcomes `chi`.
    #[arg(long)]
    pub dump_pseudo: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub n: usize,
    /// Adds `tau_hat = scale * tau0 + shift` when either is given.
    #[arg(long)]
    pub tau_hat_scale: Option<f64>,
    #[arg(long)]
    pub tau_hat_shift: Option<f64>,
}

/// Parses `args` (program name first), applying any `--config` file, and
/// runs the chosen subcommand. Returns the paths written.
pub fn run_from<I, T>(args: I) -> std::result::Result<Vec<PathBuf>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = expand_config(args).map_err(CliError::Run)?;
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    run(cli).map_err(CliError::Run)
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

/// Inserts `--key value` pairs from the `--config` file right after the
/// subcommand, so flags given on the command line take precedence.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let inline = args
        .iter()
        .position(|a| a.to_str().is_some_and(|s| s.starts_with("--config=")));
    let path = match (pos, inline) {
        (Some(i), _) => match args.get(i + 1) {
            Some(p) => PathBuf::from(p),
            None => return Ok(args),
        },
        (None, Some(i)) => PathBuf::from(&args[i].to_str().unwrap()["--config=".len()..]),
        (None, None) => return Ok(args),
    };
    let text = fs::read_to_string(&path)?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::invalid(format!("{}:{}: expected `key = value`", path.display(), lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(Error::invalid("config files cannot include other config files"));
        }
        match value {
            "true" => injected.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let at = 2.min(args.len());
    let mut out = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let common = match &cli.command {
        Command::Calibrate(a) => &a.common,
        Command::CrossCalibrate(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Evaluate(a) => &a.common,
        Command::GenData(a) => &a.common,
    };
    let jobs = common.jobs;
    let work = || -> Result<Vec<PathBuf>> {
        let mut out = Staged::new(&common.out)?;
        let written = match &cli.command {
            Command::Calibrate(a) => cmd_calibrate(a, &mut out),
            Command::CrossCalibrate(a) => cmd_cross_calibrate(a, &mut out),
            Command::Simulate(a) => cmd_simulate(a, &mut out),
            Command::Evaluate(a) => cmd_evaluate(a, &mut out),
            Command::GenData(a) => cmd_gen_data(a, &mut out),
        };
        written.and_then(|()| out.commit())
    };
    match jobs {
        Some(0) => Err(Error::invalid("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Output files are written under temporary names and renamed into place
/// only once every output of the subcommand succeeded; on failure the
/// temporaries are removed.
struct Staged {
    dir: PathBuf,
    files: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Staged {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        self.files.push((tmp.clone(), target));
        let mut w = BufWriter::new(File::create(&tmp)?);
        fill(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn commit(mut self) -> Result<Vec<PathBuf>> {
        let files = std::mem::take(&mut self.files);
        let mut done = Vec::new();
        for (tmp, target) in &files {
            if let Err(e) = fs::rename(tmp, target) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &files {
                    let _ = fs::remove_file(t);
                }
                return Err(e.into());
            }
            done.push(target.clone());
        }
        Ok(done)
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        for (tmp, _) in &self.files {
            let _ = fs::remove_file(tmp);
        }
    }
}

fn require_seed(common: &CommonArgs, why: &str) -> Result<u64> {
    common
        .seed
        .ok_or_else(|| Error::invalid(format!("--seed is required {why}")))
}

fn read_dataset(path: &Path, common: &CommonArgs) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    load_csv(
        BufReader::new(file),
        CsvOptions {
            allow_extra_columns: common.allow_extra_columns,
        },
    )
}

fn folds_for(ds: &Dataset, common: &CommonArgs) -> Result<FoldAssignment> {
    if ds.has(OptionalColumn::Fold) {
        FoldAssignment::from_dataset(ds)
    } else {
        let seed = require_seed(common, "to split rows into folds")?;
        split_folds(ds, common.folds, seed)
    }
}

fn write_json(out: &mut Staged, calibrator: &Calibrator) -> Result<()> {
    let json = calibrator.to_json()?;
    out.write("calibrator.json", |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Writes `ds` with `tau_cal` replaced by the calibrator's predictions. When
/// the calibrator has several members, `tau_hat` is replaced by the same
/// order statistic of the members' base predictions.
fn write_scored(out: &mut Staged, name: &str, calibrator: &Calibrator, ds: &Dataset) -> Result<()> {
    let tau_cal = calibrator.predict_all(ds)?;
    let mut scored = ds.with_column(OptionalColumn::TauCal, &tau_cal)?;
    if calibrator.members.len() > 1 {
        let tau_hat = ds
            .rows()
            .iter()
            .map(|r| {
                let bases = calibrator
                    .members
                    .iter()
                    .map(|m| m.base.predict(r))
                    .collect::<Result<Vec<f64>>>()?;
                calibrator.median_index_rule.select(&bases)
            })
            .collect::<Result<Vec<f64>>>()?;
        scored = scored.with_column(OptionalColumn::TauHat, &tau_hat)?;
    }
    out.write(name, |w| save_csv(w, &scored, &[]))
}

fn cmd_calibrate(args: &CalibrateArgs, out: &mut Staged) -> Result<()> {
    let common = &args.common;
    let clip: Clip = common.clip.parse()?;
    let (calibrator, scored) = match (&args.input, &args.train, &args.cal) {
        (Some(input), _, _) => {
            let ds = read_dataset(input, common)?;
            let scenario = args.learners.oracle_scenario(ds.d())?;
            let pi = args.learners.spec(&args.learners.pi_learner, scenario)?;
            let mu = args.learners.spec(&args.learners.mu_learner, scenario)?;
            let folds = folds_for(&ds, common)?;
            let fit = calibrate_fixed_crossfit(BasePredictor::tau_hat_column(), &ds, &folds, &pi, &mu, clip)?;
            (fit.calibrator, ds)
        }
        (None, Some(train), Some(cal)) => {
            let train = read_dataset(train, common)?;
            let cal = read_dataset(cal, common)?;
            let scenario = args.learners.oracle_scenario(train.d())?;
            let pi = args.learners.spec(&args.learners.pi_learner, scenario)?;
            let mu = args.learners.spec(&args.learners.mu_learner, scenario)?;
            let fit = calibrate_holdout_split(BasePredictor::tau_hat_column(), &train, &cal, &pi, &mu, clip)?;
            (fit.calibrator, cal)
        }
        _ => return Err(Error::invalid("give either --input or both --train and --cal")),
    };
    write_json(out, &calibrator)?;
    write_scored(out, "calibrated.csv", &calibrator, &scored)?;
    if let Some(path) = &args.score {
        let ds = read_dataset(path, common)?;
        write_scored(out, "scored.csv", &calibrator, &ds)?;
    }
    Ok(())
}

fn cmd_cross_calibrate(args: &CrossCalibrateArgs, out: &mut Staged) -> Result<()> {
    let common = &args.common;
    let seed = require_seed(common, "for cross-calibration")?;
    let ds = read_dataset(&args.input, common)?;
    let scenario = args.learners.oracle_scenario(ds.d())?;
    let cfg = CrossCalibrationConfig {
        k: common.folds,
        seed,
        base_spec: args.learners.spec(&args.base_learner, scenario)?,
        pi_spec: args.learners.spec(&args.learners.pi_learner, scenario)?,
        mu_spec: args.learners.spec(&args.learners.mu_learner, scenario)?,
        clip: common.clip.parse()?,
        median_rule: common.median_rule.into(),
    };
    let folds = folds_for(&ds, common)?;
    let fit = match args.variant {
        VariantArg::Pooled => cross_calibrate_pooled_with_folds(&ds, &folds, &cfg)?,
        VariantArg::Unpooled => cross_calibrate_unpooled_with_folds(&ds, &folds, &cfg)?,
    };
    write_json(out, &fit.calibrator)?;
    if let Some(path) = &args.score {
        let target = read_dataset(path, common)?;
        write_scored(out, "scored.csv", &fit.calibrator, &target)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut Staged) -> Result<()> {
    let common = &args.common;
    let seed = require_seed(common, "for simulation")?;
    let scenario = args.scenario.scenario()?;
    let mut cfg = SimConfig::new(scenario, args.n, args.reps, seed);
    cfg.k = common.folds;
    cfg.base_spec = args.learners.spec(&args.base_learner, Some(scenario))?;
    cfg.pi_spec = args.learners.spec(&args.learners.pi_learner, Some(scenario))?;
    cfg.mu_spec = args.learners.spec(&args.learners.mu_learner, Some(scenario))?;
    cfg.gamma = GammaHatConfig {
        candidate_bin_counts: args.gamma_bins.clone(),
        ..GammaHatConfig::default()
    };
    cfg.eval_n = args.eval_n;
    cfg.variant = match args.variant {
        VariantArg::Pooled => CrossVariant::Pooled,
        VariantArg::Unpooled => CrossVariant::Unpooled,
    };
    cfg.clip = common.clip.parse()?;
    cfg.median_rule = common.median_rule.into();
    cfg.standardizer_draws = args.standardizer_draws;
    let reports = run_replicates(&cfg)?;
    out.write("report.csv", |w| write_reports(w, &reports))
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut Staged) -> Result<()> {
    let common = &args.common;
    let seed = require_seed(common, "for the calibration-function estimate")?;
    let ds = read_dataset(&args.input, common)?;
    if !ds.has(OptionalColumn::Tau0) {
        return Err(Error::MissingColumn("tau0".into()));
    }
    let scenario = args.learners.oracle_scenario(ds.d())?;

    let calibrator = match &args.calibrator {
        Some(path) => Some(Calibrator::from_json(&fs::read_to_string(path)?)?),
        None => None,
    };
    let column = match (&args.column, &calibrator) {
        (_, Some(_)) => OptionalColumn::TauCal,
        (Some(c), None) => match c.as_str() {
            "tau_hat" => OptionalColumn::TauHat,
            "tau_cal" => OptionalColumn::TauCal,
            other => return Err(Error::invalid(format!("cannot evaluate column `{other}`"))),
        },
        (None, None) if ds.has(OptionalColumn::TauCal) => OptionalColumn::TauCal,
        (None, None) => OptionalColumn::TauHat,
    };
    let predictions_of = |d: &Dataset| -> Result<Vec<f64>> {
        match &calibrator {
            Some(c) => c.predict_all(d),
            None => d.column(column),
        }
    };
    let predictions = predictions_of(&ds)?;
    let truth = ds.column(OptionalColumn::Tau0)?;
    let (gamma_pred, gamma_truth) = match &args.gamma_input {
        Some(path) => {
            let g = read_dataset(path, common)?;
            (predictions_of(&g)?, g.column(OptionalColumn::Tau0)?)
        }
        None => (predictions.clone(), truth.clone()),
    };
    let gamma_cfg = GammaHatConfig {
        candidate_bin_counts: args.gamma_bins.clone(),
        ..GammaHatConfig::default()
    };
    let m = evaluate_predictions(&predictions, &truth, &gamma_pred, &gamma_truth, &gamma_cfg, seed)?;
    let standardizer = match (args.standardizer, scenario) {
        (Some(s), _) => Some(s),
        (None, Some(sc)) => Some(ite_variance(&sc, args.standardizer_draws, seed)?),
        (None, None) => None,
    };
    let report = CalibrationReport {
        estimator: args.estimator.clone().unwrap_or_else(|| column.name().to_string()),
        calibrated: column == OptionalColumn::TauCal,
        n: ds.len(),
        replicate: 0,
        cal: m.cal,
        mse: m.mse,
        dis: m.dis,
        bias_lower: m.bias_lower,
        bias_upper: m.bias_upper,
        standardizer,
        seed,
    };
    out.write("report.csv", |w| write_reports(w, &[report]))?;

    if args.dump_pseudo {
        let pi = args.learners.spec(&args.learners.pi_learner, scenario)?;
        let mu = args.learners.spec(&args.learners.mu_learner, scenario)?;
        let folds = folds_for(&ds, common)?;
        let clip: Clip = common.clip.parse()?;
        let nf = cross_fit_nuisances(&ds, &folds, &pi, &mu, clip)?;
        let chi = compute_pseudo(&ds, &nf)?.chi;
        out.write("pseudo.csv", |w| save_csv(w, &ds, &[("chi", &chi)]))?;
    }
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs, out: &mut Staged) -> Result<()> {
    let seed = require_seed(&args.common, "to generate data")?;
    let scenario = args.scenario.scenario()?;
    let mut r = rng::stream(seed, rng::DATA_STREAM);
    let mut ds = scenario.generate(args.n, &mut r)?;
    if args.tau_hat_scale.is_some() || args.tau_hat_shift.is_some() {
        let (a, b) = (args.tau_hat_scale.unwrap_or(1.0), args.tau_hat_shift.unwrap_or(0.0));
        let tau_hat: Vec<f64> = ds
            .column(OptionalColumn::Tau0)?
            .iter()
            .map(|t| a * t + b)
            .collect();
        ds = ds.with_column(OptionalColumn::TauHat, &tau_hat)?;
    }
    out.write("data.csv", |w| save_csv(w, &ds, &[]))
}
