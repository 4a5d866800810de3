//! Weighted least-squares isotonic regression by pool-adjacent-violators.
//!
//! The fit is returned as a right-continuous step function that only jumps
//! at observed predictor values and is flat beyond the observed range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictor/response pairs with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weight: Vec<f64>,
}

impl WeightedPoints {
    pub fn new(x: Vec<f64>, y: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("isotonic regression input"));
        }
        for len in [y.len(), weight.len()] {
            if len != x.len() {
                return Err(Error::LengthMismatch {
                    context: "isotonic regression input",
                    expected: x.len(),
                    actual: len,
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("isotonic predictor values"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("isotonic responses"));
        }
        if weight.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("isotonic weights must be positive and finite"));
        }
        Ok(WeightedPoints { x, y, weight })
    }

    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let weight = vec![1.0; x.len()];
        Self::new(x, y, weight)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `t ↦ base_level + Σ_j increments[j] · 1(t ≥ jump_points[j])`.
///
/// Jump points are strictly increasing and increments strictly positive, so
/// the function is nondecreasing by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunctionRepr", into = "StepFunctionRepr")]
pub struct StepFunction {
    base_level: f64,
    jump_points: Vec<f64>,
    increments: Vec<f64>,
    /// `levels[j]` is the value on `[jump_points[j-1], jump_points[j])`,
    /// accumulated left to right from the stored increments.
    levels: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepFunctionRepr {
    base_level: f64,
    jump_points: Vec<f64>,
    increments: Vec<f64>,
}

impl TryFrom<StepFunctionRepr> for StepFunction {
    type Error = Error;

    fn try_from(r: StepFunctionRepr) -> Result<Self> {
        StepFunction::new(r.base_level, r.jump_points, r.increments)
    }
}

impl From<StepFunction> for StepFunctionRepr {
    fn from(f: StepFunction) -> Self {
        StepFunctionRepr {
            base_level: f.base_level,
            jump_points: f.jump_points,
            increments: f.increments,
        }
    }
}

impl StepFunction {
    pub fn new(base_level: f64, jump_points: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if jump_points.len() != increments.len() {
            return Err(Error::LengthMismatch {
                context: "step function increments",
                expected: jump_points.len(),
                actual: increments.len(),
            });
        }
        if !base_level.is_finite()
            || jump_points.iter().chain(&increments).any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("step function"));
        }
        if jump_points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid("jump points must be strictly increasing"));
        }
        if increments.iter().any(|&a| a <= 0.0) {
            return Err(Error::invalid("step increments must be positive"));
        }
        let mut levels = Vec::with_capacity(increments.len() + 1);
        let mut level = base_level;
        levels.push(level);
        for inc in &increments {
            level += inc;
            levels.push(level);
        }
        Ok(StepFunction {
            base_level,
            jump_points,
            increments,
            levels,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, Vec::new(), Vec::new())
    }

    pub fn base_level(&self) -> f64 {
        self.base_level
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Distinct values the function takes, in increasing order.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.jump_points.partition_point(|&u| u <= t);
        self.levels[idx]
    }
}

/// Fits the nondecreasing function minimizing `Σ w_i (y_i - θ(x_i))²`.
///
/// Tied `x` values are pooled first (weight sum, weighted-mean response);
/// PAVA then runs over the distinct sorted values with a block stack.
pub fn pava_fit(points: &WeightedPoints) -> Result<StepFunction> {
    if points.is_empty() {
        return Err(Error::Empty("isotonic regression input"));
    }
    if points.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("isotonic responses"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points.x[i].total_cmp(&points.x[j]));

    struct Block {
        x_start: f64,
        weight: f64,
        weighted_sum: f64,
        mean: f64,
    }
    let mut stack: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let x = points.x[order[i]];
        let (mut weight, mut weighted_sum) = (0.0, 0.0);
        while i < order.len() && points.x[order[i]] == x {
            let k = order[i];
            weight += points.weight[k];
            weighted_sum += points.weight[k] * points.y[k];
            i += 1;
        }
        let mut block = Block {
            x_start: x,
            weight,
            weighted_sum,
            mean: weighted_sum / weight,
        };
        while let Some(prev) = stack.last() {
            if prev.mean < block.mean {
                break;
            }
            let prev = stack.pop().unwrap();
            block.x_start = prev.x_start;
            block.weight += prev.weight;
            block.weighted_sum += prev.weighted_sum;
            block.mean = block.weighted_sum / block.weight;
        }
        stack.push(block);
    }

    let base_level = stack[0].mean;
    let jump_points = stack[1..].iter().map(|b| b.x_start).collect();
    let increments = stack.windows(2).map(|w| w[1].mean - w[0].mean).collect();
    StepFunction::new(base_level, jump_points, increments)
}

/// Fitted values `f(x_i)` in input order.
pub fn fitted_values(f: &StepFunction, points: &WeightedPoints) -> Vec<f64> {
    points.x.iter().map(|&x| f.evaluate(x)).collect()
}

/// Weighted residual sums `Σ_{i ∈ B} w_i (f(x_i) - y_i)` over each maximal
/// level set `B` of `f` on the observed points, ordered by level. For a
/// least-squares isotonic fit every entry vanishes.
pub fn block_residual_sums(f: &StepFunction, points: &WeightedPoints) -> Vec<f64> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points.x[i].total_cmp(&points.x[j]));
    let mut sums: Vec<f64> = Vec::new();
    let mut current_level = None;
    for &i in &order {
        let level = f.evaluate(points.x[i]);
        let r = points.weight[i] * (level - points.y[i]);
        if current_level == Some(level) {
            *sums.last_mut().unwrap() += r;
        } else {
            sums.push(r);
            current_level = Some(level);
        }
    }
    sums
}

/// `Σ_i w_i r(f(x_i)) (f(x_i) - y_i)` for an arbitrary transform `r`.
pub fn score_equation<R: Fn(f64) -> f64>(
    f: &StepFunction,
    points: &WeightedPoints,
    r: R,
) -> f64 {
    (0..points.len())
        .map(|i| {
            let fit = f.evaluate(points.x[i]);
            points.weight[i] * r(fit) * (fit - points.y[i])
        })
        .sum()
}
