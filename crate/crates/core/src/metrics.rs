//! Calibration error, MSE, distortion and within-decile bias, estimated on
//! samples with a known treatment effect, plus exact population versions
//! for finite-support laws.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FoldAssignment;
use crate::error::{Error, Result};
use crate::rng;
use crate::simulate::Scenario;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_aligned(a: &[f64], b: &[f64], context: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            context,
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty(context));
    }
    Ok(())
}

/// Anything usable as an estimate of `t ↦ E[τ0(W) | τ(W) = t]`.
pub trait CalibrationCurve {
    fn value(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> CalibrationCurve for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Piecewise-constant regression on equal-frequency bins of the prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMean {
    /// Left edges of bins 1..; bin 0 extends to -∞.
    edges: Vec<f64>,
    means: Vec<f64>,
}

impl BinnedMean {
    /// Fits `bins` equal-frequency bins. Edges are order statistics at
    /// positions `⌊i·n/bins⌋`; duplicate edges collapse, so tied predictions
    /// always share a bin and every bin is nonempty.
    pub fn fit(predictions: &[f64], truth: &[f64], bins: usize) -> Result<Self> {
        check_aligned(predictions, truth, "binned regression")?;
        let n = predictions.len();
        let mut sorted = predictions.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut edges: Vec<f64> = Vec::new();
        for i in 1..bins.max(1) {
            let e = sorted[i * n / bins];
            if e > sorted[0] && edges.last().is_none_or(|&last| e > last) {
                edges.push(e);
            }
        }
        let mut sums = vec![0.0; edges.len() + 1];
        let mut counts = vec![0usize; edges.len() + 1];
        for (&t, &y) in predictions.iter().zip(truth) {
            let b = edges.partition_point(|&e| e <= t);
            sums[b] += y;
            counts[b] += 1;
        }
        let means = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        Ok(BinnedMean { edges, means })
    }

    pub fn bins(&self) -> usize {
        self.means.len()
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.means[self.edges.partition_point(|&e| e <= t)]
    }
}

impl CalibrationCurve for BinnedMean {
    fn value(&self, t: f64) -> f64 {
        self.predict(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaHatConfig {
    pub candidate_bin_counts: Vec<usize>,
    pub cv_folds: usize,
}

impl Default for GammaHatConfig {
    fn default() -> Self {
        GammaHatConfig {
            candidate_bin_counts: vec![5, 10, 20, 50],
            cv_folds: 5,
        }
    }
}

/// Estimates the calibration function of a predictor from its predictions
/// and the true effects on a sample: equal-frequency bin means, with the bin
/// count chosen by cross-validated squared error among the admissible
/// candidates (`2 ≤ bins ≤ n/2`). Ties in the CV error keep the smaller
/// count. Constant predictions give a single bin.
pub fn estimate_gamma0(
    predictions: &[f64],
    true_cate: &[f64],
    cfg: &GammaHatConfig,
    seed: u64,
) -> Result<BinnedMean> {
    check_aligned(predictions, true_cate, "calibration-function estimate")?;
    if cfg.cv_folds < 2 {
        return Err(Error::invalid("gamma estimation needs at least 2 CV folds"));
    }
    let n = predictions.len();
    let mut candidates: Vec<usize> = cfg
        .candidate_bin_counts
        .iter()
        .copied()
        .filter(|&b| b >= 2 && b <= n / 2)
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    let constant = predictions.iter().all(|&t| t == predictions[0]);
    if candidates.is_empty() || constant || n < cfg.cv_folds {
        return BinnedMean::fit(predictions, true_cate, 1);
    }
    if candidates.len() == 1 {
        return BinnedMean::fit(predictions, true_cate, candidates[0]);
    }

    let folds = FoldAssignment::random_on_stream(n, cfg.cv_folds, seed, rng::GAMMA_CV_STREAM)?;
    let mut best: Option<(f64, usize)> = None;
    for &bins in &candidates {
        let mut sse = Vec::with_capacity(n);
        for s in 0..folds.k() {
            let train = folds.complement(s);
            let tp: Vec<f64> = train.iter().map(|&i| predictions[i]).collect();
            let tt: Vec<f64> = train.iter().map(|&i| true_cate[i]).collect();
            let model = BinnedMean::fit(&tp, &tt, bins)?;
            for i in folds.members(s) {
                sse.push((true_cate[i] - model.predict(predictions[i])).powi(2));
            }
        }
        let sse = compensated_sum(sse);
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, bins));
        }
    }
    BinnedMean::fit(predictions, true_cate, best.unwrap().1)
}

/// `(1/n) Σ (τ0_i - τ̂_i)(γ̂(τ̂_i) - τ̂_i)`.
pub fn cal_hat<G: CalibrationCurve + ?Sized>(
    predictions: &[f64],
    true_cate: &[f64],
    gamma: &G,
) -> Result<f64> {
    check_aligned(predictions, true_cate, "calibration error")?;
    let total = compensated_sum(
        predictions
            .iter()
            .zip(true_cate)
            .map(|(&t, &truth)| (truth - t) * (gamma.value(t) - t)),
    );
    Ok(total / predictions.len() as f64)
}

pub fn mse_hat(predictions: &[f64], true_cate: &[f64]) -> Result<f64> {
    check_aligned(predictions, true_cate, "mean squared error")?;
    let total = compensated_sum(predictions.iter().zip(true_cate).map(|(p, t)| (p - t).powi(2)));
    Ok(total / predictions.len() as f64)
}

/// Distortion as the part of the MSE not explained by miscalibration.
pub fn dis_hat(mse: f64, cal: f64) -> f64 {
    mse - cal
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decile {
    Lower,
    Upper,
}

/// Signed mean of `γ̂(τ̂) - τ̂` over rows whose prediction is at most the
/// empirical 10th percentile (`Lower`) or at least the 90th (`Upper`). The
/// percentiles are the order statistics at positions `⌈n/10⌉` and
/// `n + 1 - ⌈n/10⌉`.
pub fn bin_bias<G: CalibrationCurve + ?Sized>(
    predictions: &[f64],
    gamma: &G,
    decile: Decile,
) -> Result<f64> {
    let n = predictions.len();
    if n < 10 {
        return Err(Error::invalid(format!("decile bias needs at least 10 predictions, got {n}")));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = n.div_ceil(10);
    let in_bin: Box<dyn Fn(f64) -> bool> = match decile {
        Decile::Lower => {
            let q = sorted[tail - 1];
            Box::new(move |t| t <= q)
        }
        Decile::Upper => {
            let q = sorted[n - tail];
            Box::new(move |t| t >= q)
        }
    };
    let (mut count, mut diffs) = (0usize, Vec::new());
    for &t in predictions.iter().filter(|&&t| in_bin(t)) {
        diffs.push(gamma.value(t) - t);
        count += 1;
    }
    Ok(compensated_sum(diffs) / count as f64)
}

/// A joint law of covariates and potential outcomes `(Y(0), Y(1))`.
pub trait PotentialOutcomeLaw {
    fn sample_w(&self, rng: &mut rng::SimRng) -> Vec<f64>;
    fn sample_potential_outcome(&self, a: u8, w: &[f64], rng: &mut rng::SimRng) -> f64;
}

/// Arms are drawn independently given the covariates.
impl PotentialOutcomeLaw for Scenario {
    fn sample_w(&self, rng: &mut rng::SimRng) -> Vec<f64> {
        Scenario::sample_w(self, rng)
    }

    fn sample_potential_outcome(&self, a: u8, w: &[f64], rng: &mut rng::SimRng) -> f64 {
        self.sample_y(a, w, rng)
    }
}

/// Monte-Carlo variance of `Y(1) - Y(0)`, used to standardize CAL and MSE.
pub fn ite_variance<L: PotentialOutcomeLaw + ?Sized>(law: &L, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc < 10_000 {
        return Err(Error::invalid(format!(
            "standardizer Monte-Carlo needs at least 10000 draws, got {n_mc}"
        )));
    }
    let mut r = rng::stream(seed, rng::STANDARDIZER_STREAM);
    let draws: Vec<f64> = (0..n_mc)
        .map(|_| {
            let w = law.sample_w(&mut r);
            let y1 = law.sample_potential_outcome(1, &w, &mut r);
            let y0 = law.sample_potential_outcome(0, &w, &mut r);
            y1 - y0
        })
        .collect();
    Ok(sample_variance(&draws))
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0)
}

/// Least-squares slope of `ln(cal)` against `ln(ell)`.
pub fn rate_slope(ell_values: &[usize], cal_values: &[f64]) -> Result<f64> {
    if ell_values.len() != cal_values.len() {
        return Err(Error::LengthMismatch {
            context: "rate slope",
            expected: ell_values.len(),
            actual: cal_values.len(),
        });
    }
    if ell_values.len() < 2 {
        return Err(Error::invalid("rate slope needs at least two points"));
    }
    if ell_values.contains(&0) || cal_values.iter().any(|&c| c.is_nan() || c <= 0.0) {
        return Err(Error::invalid("rate slope needs positive sizes and errors"));
    }
    let xs: Vec<f64> = ell_values.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = cal_values.iter().map(|c| c.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate slope needs at least two distinct sizes"));
    }
    Ok(sxy / sxx)
}

/// A covariate law with finitely many support points, where CAL, MSE and
/// DIS can be computed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupport {
    prob: Vec<f64>,
    tau0: Vec<f64>,
}

impl FiniteSupport {
    pub fn new(prob: Vec<f64>, tau0: Vec<f64>) -> Result<Self> {
        check_aligned(&prob, &tau0, "finite-support law")?;
        if prob.iter().any(|&p| p.is_nan() || p <= 0.0) {
            return Err(Error::invalid("support probabilities must be positive"));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("support probabilities sum to {total}")));
        }
        Ok(FiniteSupport { prob, tau0 })
    }

    pub fn uniform(tau0: Vec<f64>) -> Result<Self> {
        let p = 1.0 / tau0.len() as f64;
        Self::new(vec![p; tau0.len()], tau0)
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// `γ0(τ, w) = E[τ0(W) | τ(W) = τ(w)]` at each support point.
    pub fn calibration_function(&self, tau: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (mut mass, mut acc) = (0.0, 0.0);
                for j in 0..self.len() {
                    if tau[j] == tau[i] {
                        mass += self.prob[j];
                        acc += self.prob[j] * self.tau0[j];
                    }
                }
                acc / mass
            })
            .collect()
    }

    pub fn cal(&self, tau: &[f64]) -> f64 {
        let gamma = self.calibration_function(tau);
        compensated_sum((0..self.len()).map(|i| self.prob[i] * (gamma[i] - tau[i]).powi(2)))
    }

    pub fn mse(&self, tau: &[f64]) -> f64 {
        compensated_sum((0..self.len()).map(|i| self.prob[i] * (self.tau0[i] - tau[i]).powi(2)))
    }

    /// `E{var[τ0(W) | τ(W)]}`.
    pub fn dis(&self, tau: &[f64]) -> f64 {
        let gamma = self.calibration_function(tau);
        compensated_sum(
            (0..self.len()).map(|i| self.prob[i] * (self.tau0[i] - gamma[i]).powi(2)),
        )
    }
}

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub estimator: String,
    pub calibrated: bool,
    pub n: usize,
    pub replicate: usize,
    pub cal: f64,
    pub mse: f64,
    pub dis: f64,
    pub bias_lower: f64,
    pub bias_upper: f64,
    /// `Var(Y(1) - Y(0))`; absent when no potential-outcome law is known.
    pub standardizer: Option<f64>,
    pub seed: u64,
}

/// The metric part of a report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub cal: f64,
    pub mse: f64,
    pub dis: f64,
    pub bias_lower: f64,
    pub bias_upper: f64,
}

/// Fits the calibration function on `(gamma_predictions, gamma_truth)` and
/// evaluates every metric on `(predictions, truth)`.
pub fn evaluate_predictions(
    predictions: &[f64],
    truth: &[f64],
    gamma_predictions: &[f64],
    gamma_truth: &[f64],
    cfg: &GammaHatConfig,
    seed: u64,
) -> Result<Metrics> {
    let gamma = estimate_gamma0(gamma_predictions, gamma_truth, cfg, seed)?;
    let cal = cal_hat(predictions, truth, &gamma)?;
    let mse = mse_hat(predictions, truth)?;
    Ok(Metrics {
        cal,
        mse,
        dis: dis_hat(mse, cal),
        bias_lower: bin_bias(predictions, &gamma, Decile::Lower)?,
        bias_upper: bin_bias(predictions, &gamma, Decile::Upper)?,
    })
}

pub const REPORT_HEADER: [&str; 11] = [
    "estimator",
    "calibrated",
    "n",
    "replicate",
    "cal",
    "mse",
    "dis",
    "bias_lower",
    "bias_upper",
    "standardizer",
    "seed",
];

pub fn write_reports<W: Write>(sink: W, reports: &[CalibrationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.estimator.clone(),
            r.calibrated.to_string(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.cal.to_string(),
            r.mse.to_string(),
            r.dis.to_string(),
            r.bias_lower.to_string(),
            r.bias_upper.to_string(),
            r.standardizer.map(|s| s.to_string()).unwrap_or_default(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports<R: std::io::Read>(source: R) -> Result<Vec<CalibrationReport>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: REPORT_HEADER[j].to_string(),
                message: format!("not a number: `{}`", field(j)),
            })
        };
        let int = |j: usize| -> Result<u64> {
            field(j).parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: REPORT_HEADER[j].to_string(),
                message: format!("not an integer: `{}`", field(j)),
            })
        };
        out.push(CalibrationReport {
            estimator: field(0).to_string(),
            calibrated: field(1) == "true",
            n: int(2)? as usize,
            replicate: int(3)? as usize,
            cal: num(4)?,
            mse: num(5)?,
            dis: num(6)?,
            bias_lower: num(7)?,
            bias_upper: num(8)?,
            standardizer: if field(9).is_empty() { None } else { Some(num(9)?) },
            seed: int(10)?,
        });
    }
    Ok(out)
}

/// Draws `n` values uniformly from `[lo, hi)`; test and bench helper.
pub fn uniform_sample(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 7);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}
