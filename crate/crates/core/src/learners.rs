//! Built-in supervised learners: ridge least squares, ridge logistic
//! regression (Newton/IRLS), and gradient-boosted depth-1 trees.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn linear_predictor(intercept: f64, coefficients: &[f64], w: &[f64]) -> f64 {
    intercept + coefficients.iter().zip(w).map(|(b, x)| b * x).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, w: &[f64]) -> f64 {
        linear_predictor(self.intercept, &self.coefficients, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// False when the Newton iterations hit the cap before the gradient
    /// tolerance; the last iterate is kept.
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

impl LogisticModel {
    pub fn predict(&self, w: &[f64]) -> f64 {
        expit(self.linear_predictor(w))
    }

    pub fn linear_predictor(&self, w: &[f64]) -> f64 {
        linear_predictor(self.intercept, &self.coefficients, w)
    }
}

fn check_design(x: &[&[f64]], y: &[f64], what: &'static str) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty(what));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            context: what,
            expected: x.len(),
            actual: y.len(),
        });
    }
    let d = x[0].len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::invalid(format!("{what}: ragged covariate rows")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(d)
}

/// Solves the symmetric positive semi-definite system `a·x = b`, falling
/// back to an SVD least-squares solution when Cholesky fails.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let svd = a.svd(true, true);
    let tol = f64::EPSILON * svd.singular_values.max() * b.len() as f64;
    svd.solve(b, tol).unwrap_or_else(|_| DVector::zeros(b.len()))
}

/// Least squares with penalty `ridge · Σ_j β_j²` on the slopes (the
/// intercept is unpenalized). Covariates are centered before solving.
pub fn fit_linear(x: &[&[f64]], y: &[f64], ridge: f64) -> Result<LinearModel> {
    let d = check_design(x, y, "linear regression")?;
    let n = x.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut x_mean = vec![0.0; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    if d == 0 {
        return Ok(LinearModel {
            intercept: y_mean,
            coefficients: vec![],
        });
    }

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centered = vec![0.0; d];
    for (row, &yi) in x.iter().zip(y) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let r = yi - y_mean;
        for j in 0..d {
            rhs[j] += centered[j] * r;
            for l in j..d {
                gram[(j, l)] += centered[j] * centered[l];
            }
        }
    }
    for j in 0..d {
        gram[(j, j)] += ridge;
        for l in 0..j {
            gram[(j, l)] = gram[(l, j)];
        }
    }
    let beta = solve_spd(gram, &rhs);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - linear_predictor(0.0, &coefficients, &x_mean);
    Ok(LinearModel {
        intercept,
        coefficients,
    })
}

/// Ridge logistic regression by damped Newton iterations (IRLS).
///
/// Minimizes `Σ_i [log(1 + e^{η_i}) - y_i η_i] + (ridge/2) Σ_j β_j²` with the
/// intercept unpenalized. Stops when the largest gradient entry is at most
/// `tol · max(1, n)` or after `max_iter` Newton steps.
pub fn fit_logistic(
    x: &[&[f64]],
    y: &[f64],
    ridge: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticModel> {
    let d = check_design(x, y, "logistic regression")?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logistic regression needs a 0/1 response"));
    }
    let n = x.len();
    let p = d + 1;
    let objective = |beta: &DVector<f64>| -> f64 {
        let mut total = 0.0;
        for (row, &yi) in x.iter().zip(y) {
            let eta = beta[0] + linear_predictor(0.0, &beta.as_slice()[1..], row);
            total += softplus(eta) - yi * eta;
        }
        total + 0.5 * ridge * beta.rows(1, d).norm_squared()
    };

    let mut beta = DVector::<f64>::zeros(p);
    let mut current = objective(&beta);
    let mut converged = false;
    let threshold = tol * (n as f64).max(1.0);
    let mut xi = vec![0.0; p];
    for iter in 0..=max_iter {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for (row, &yi) in x.iter().zip(y) {
            xi[0] = 1.0;
            xi[1..].copy_from_slice(row);
            let eta = beta[0] + linear_predictor(0.0, &beta.as_slice()[1..], row);
            let mu = expit(eta);
            let weight = (mu * (1.0 - mu)).max(1e-12);
            for j in 0..p {
                grad[j] += xi[j] * (mu - yi);
                for l in j..p {
                    hess[(j, l)] += weight * xi[j] * xi[l];
                }
            }
        }
        for j in 1..p {
            grad[j] += ridge * beta[j];
            hess[(j, j)] += ridge;
        }
        if grad.amax() <= threshold {
            converged = true;
            break;
        }
        if iter == max_iter {
            break;
        }
        for j in 0..p {
            for l in 0..j {
                hess[(j, l)] = hess[(l, j)];
            }
        }
        let step = solve_spd(hess, &grad);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &beta - &step * scale;
            let value = objective(&candidate);
            if value <= current {
                beta = candidate;
                current = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta.as_slice()[1..].to_vec(),
        converged,
    })
}

/// Depth-1 regression tree. `feature == None` is a constant stump, used when
/// no covariate admits a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    /// `left` when `w[feature] <= threshold`, else `right`.
    pub fn predict(&self, w: &[f64]) -> f64 {
        match self.feature {
            Some(j) if w[j] > self.threshold => self.right,
            _ => self.left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Logit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpEnsemble {
    pub init: f64,
    pub learning_rate: f64,
    pub link: Link,
    pub stumps: Vec<Stump>,
}

impl StumpEnsemble {
    pub fn raw_score(&self, w: &[f64]) -> f64 {
        self.init
            + self
                .stumps
                .iter()
                .map(|s| self.learning_rate * s.predict(w))
                .sum::<f64>()
    }

    pub fn predict(&self, w: &[f64]) -> f64 {
        match self.link {
            Link::Identity => self.raw_score(w),
            Link::Logit => expit(self.raw_score(w)),
        }
    }
}

/// Per-feature sort orders, shared by every boosting round.
struct SortedFeatures {
    orders: Vec<Vec<usize>>,
}

impl SortedFeatures {
    fn new(x: &[&[f64]], d: usize) -> Self {
        let orders = (0..d)
            .map(|j| {
                let mut o: Vec<usize> = (0..x.len()).collect();
                o.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]));
                o
            })
            .collect();
        SortedFeatures { orders }
    }

    /// Best split of `target` by exact SSE scan over midpoints of adjacent
    /// distinct values. Ties go to the lowest feature, then lowest threshold.
    fn best_split(&self, x: &[&[f64]], target: &[f64]) -> Option<(usize, f64)> {
        let n = target.len();
        let total: f64 = target.iter().sum();
        let mut best: Option<(f64, usize, f64)> = None;
        for (j, order) in self.orders.iter().enumerate() {
            let mut left_sum = 0.0;
            for p in 0..n - 1 {
                left_sum += target[order[p]];
                let (lo, hi) = (x[order[p]][j], x[order[p + 1]][j]);
                if lo == hi {
                    continue;
                }
                let n_left = (p + 1) as f64;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left + right_sum * right_sum / (n as f64 - n_left);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi || threshold < lo {
                        threshold = lo;
                    }
                    best = Some((gain, j, threshold));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}

/// Newton leaf values `Σ g / Σ h` on each side of a split.
fn leaf_values(
    x: &[&[f64]],
    grad: &[f64],
    hess: &[f64],
    split: Option<(usize, f64)>,
) -> Stump {
    let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let goes_left = match split {
            Some((j, t)) => x[i][j] <= t,
            None => true,
        };
        if goes_left {
            gl += grad[i];
            hl += hess[i];
        } else {
            gr += grad[i];
            hr += hess[i];
        }
    }
    let ratio = |g: f64, h: f64| if h > 0.0 { g / h } else { 0.0 };
    let left = ratio(gl, hl);
    let right = if split.is_some() { ratio(gr, hr) } else { left };
    Stump {
        feature: split.map(|(j, _)| j),
        threshold: split.map_or(0.0, |(_, t)| t),
        left,
        right,
    }
}

fn check_boosting(rounds: usize, learning_rate: f64) -> Result<()> {
    if rounds == 0 {
        return Err(Error::invalid("boosting needs at least one round"));
    }
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(Error::invalid(format!(
            "boosting learning rate must lie in (0, 1], got {learning_rate}"
        )));
    }
    Ok(())
}

/// Least-squares gradient boosting of `rounds` stumps with shrinkage.
pub fn fit_boosted_stumps(
    x: &[&[f64]],
    y: &[f64],
    rounds: usize,
    learning_rate: f64,
) -> Result<StumpEnsemble> {
    check_boosting(rounds, learning_rate)?;
    let d = check_design(x, y, "boosted stumps")?;
    let sorted = SortedFeatures::new(x, d);
    let init = y.iter().sum::<f64>() / y.len() as f64;
    let mut fitted = vec![init; y.len()];
    let hess = vec![1.0; y.len()];
    let mut residual = vec![0.0; y.len()];
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        for i in 0..y.len() {
            residual[i] = y[i] - fitted[i];
        }
        let split = sorted.best_split(x, &residual);
        let stump = leaf_values(x, &residual, &hess, split);
        for i in 0..y.len() {
            fitted[i] += learning_rate * stump.predict(x[i]);
        }
        stumps.push(stump);
    }
    Ok(StumpEnsemble {
        init,
        learning_rate,
        link: Link::Identity,
        stumps,
    })
}

/// Binomial-deviance gradient boosting of stumps for a 0/1 response; splits
/// are chosen on the gradient, leaves take a Newton step.
pub fn fit_boosted_stumps_logistic(
    x: &[&[f64]],
    y: &[f64],
    rounds: usize,
    learning_rate: f64,
) -> Result<StumpEnsemble> {
    check_boosting(rounds, learning_rate)?;
    let d = check_design(x, y, "boosted stumps")?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("logistic boosting needs a 0/1 response"));
    }
    let sorted = SortedFeatures::new(x, d);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mean = mean.clamp(1e-6, 1.0 - 1e-6);
    let init = (mean / (1.0 - mean)).ln();
    let mut score = vec![init; y.len()];
    let mut grad = vec![0.0; y.len()];
    let mut hess = vec![0.0; y.len()];
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        for i in 0..y.len() {
            let p = expit(score[i]);
            grad[i] = y[i] - p;
            hess[i] = (p * (1.0 - p)).max(1e-12);
        }
        let split = sorted.best_split(x, &grad);
        let stump = leaf_values(x, &grad, &hess, split);
        for i in 0..y.len() {
            score[i] += learning_rate * stump.predict(x[i]);
        }
        stumps.push(stump);
    }
    Ok(StumpEnsemble {
        init,
        learning_rate,
        link: Link::Logit,
        stumps,
    })
}
