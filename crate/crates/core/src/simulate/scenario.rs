//! The two simulation designs, with closed-form propensity, outcome
//! regression and treatment effect.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::learners::expit;

/// Number of covariates entering the Scenario 2 formulas.
pub const SCENARIO2_ACTIVE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum Scenario {
    /// Binary outcome, four covariates, nonlinear logit-scale effects.
    #[serde(rename = "1")]
    One,
    /// Gaussian outcome linear in the first 20 of `d_total` covariates.
    #[serde(rename = "2")]
    Two { d_total: usize },
}

const S2_PROPENSITY: [f64; 20] = [
    -0.5, -0.5, -0.5, 0.5, -0.5, 0.5, -0.5, -0.5, -0.5, -0.2, 0.5, -1.0, 1.0, -1.5, 1.0, -1.0,
    2.0, -1.0, 1.5, -1.0,
];
/// Scenario 2 outcome coefficients on `a·w_j` (j = 1, 3, 5, 7, 9).
const S2_TREATED: [(usize, f64); 5] = [(0, 3.0), (2, 1.5), (4, 2.5), (6, 1.0), (8, 1.0)];
/// Scenario 2 outcome coefficients on `(1 - a)·w_j` (j = 2, 4, 6, 8, 10).
const S2_CONTROL: [(usize, f64); 5] = [(1, 6.5), (3, 4.0), (5, -6.0), (7, 4.5), (9, 2.5)];
/// Scenario 2 outcome coefficients on `w_11..w_20`, shared by both arms.
const S2_SHARED: [f64; 10] = [1.5, -2.5, 1.0, -1.5, 3.0, -2.0, 3.0, -1.0, 1.5, -2.0];

impl Scenario {
    pub fn from_id(id: u32, d_total: usize) -> Result<Self> {
        match id {
            1 => Ok(Scenario::One),
            2 => Scenario::two(d_total),
            other => Err(Error::invalid(format!("unknown scenario {other} (expected 1 or 2)"))),
        }
    }

    pub fn two(d_total: usize) -> Result<Self> {
        if d_total < SCENARIO2_ACTIVE {
            return Err(Error::invalid(format!(
                "scenario 2 needs at least {SCENARIO2_ACTIVE} covariates, got {d_total}"
            )));
        }
        Ok(Scenario::Two { d_total })
    }

    pub fn id(&self) -> u32 {
        match self {
            Scenario::One => 1,
            Scenario::Two { .. } => 2,
        }
    }

    /// Covariate dimension of generated data.
    pub fn dim(&self) -> usize {
        match self {
            Scenario::One => 4,
            Scenario::Two { d_total } => *d_total,
        }
    }

    pub fn pi0(&self, w: &[f64]) -> f64 {
        match self {
            Scenario::One => expit(-0.25 - w[0] + 0.5 * w[1] - w[2] + 0.5 * w[3]),
            Scenario::Two { .. } => {
                let eta: f64 = S2_PROPENSITY.iter().zip(w).map(|(b, x)| b * x).sum();
                expit(0.2 + eta)
            }
        }
    }

    /// Outcome regression `E(Y | A = a, W = w)`.
    pub fn mu0(&self, a: u8, w: &[f64]) -> f64 {
        let a = f64::from(a);
        match self {
            Scenario::One => {
                let ind = |b: bool| f64::from(u8::from(b));
                expit(
                    1.5 + 1.5 * a + 2.0 * a * w[0].abs() * w[1].abs()
                        - 2.5 * (1.0 - a) * w[1].abs() * w[2]
                        + 2.5 * w[2]
                        + 2.5 * (1.0 - a) * w[3].abs().sqrt()
                        - 1.5 * a * ind(w[1] < 0.5)
                        + 1.5 * (1.0 - a) * ind(w[3] < 0.0),
                )
            }
            Scenario::Two { .. } => {
                let treated: f64 = S2_TREATED.iter().map(|&(j, b)| b * w[j]).sum();
                let control: f64 = S2_CONTROL.iter().map(|&(j, b)| b * w[j]).sum();
                let shared: f64 = S2_SHARED.iter().zip(&w[10..20]).map(|(b, x)| b * x).sum();
                -0.5 + 3.5 * a + a * treated + (1.0 - a) * control + shared
            }
        }
    }

    /// Conditional average treatment effect `mu0(1, w) - mu0(0, w)`.
    pub fn tau0(&self, w: &[f64]) -> f64 {
        match self {
            Scenario::One => self.mu0(1, w) - self.mu0(0, w),
            Scenario::Two { .. } => {
                3.5 + 3.0 * w[0] - 6.5 * w[1] + 1.5 * w[2] - 4.0 * w[3] + 2.5 * w[4]
                    + 6.0 * w[5]
                    + w[6]
                    - 4.5 * w[7]
                    + w[8]
                    - 2.5 * w[9]
            }
        }
    }

    pub fn sample_w<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Draws `Y` from its conditional law given `(a, w)`.
    pub fn sample_y<R: Rng + ?Sized>(&self, a: u8, w: &[f64], rng: &mut R) -> f64 {
        let mean = self.mu0(a, w);
        match self {
            Scenario::One => {
                let coin = Bernoulli::new(mean).expect("expit lies in [0, 1]");
                f64::from(u8::from(coin.sample(rng)))
            }
            Scenario::Two { .. } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + z
            }
        }
    }

    pub fn sample_a<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R) -> u8 {
        let coin = Bernoulli::new(self.pi0(w)).expect("expit lies in [0, 1]");
        u8::from(coin.sample(rng))
    }

    /// One observation with its `tau0` and `pi0` oracle columns set. Draw
    /// order per row: covariates, treatment, outcome.
    pub fn sample_observation<R: Rng + ?Sized>(&self, rng: &mut R) -> Observation {
        let w = self.sample_w(rng);
        let a = self.sample_a(&w, rng);
        let y = self.sample_y(a, &w, rng);
        let mut obs = Observation::new(w, a, y);
        obs.tau0 = Some(self.tau0(&obs.w));
        obs.pi0 = Some(self.pi0(&obs.w));
        obs
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Empty("simulated sample"));
        }
        Dataset::new((0..n).map(|_| self.sample_observation(rng)).collect())
    }
}

/// Scenario 1 sample of size `n`.
pub fn gen_scenario1<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Dataset> {
    Scenario::One.generate(n, rng)
}

/// Scenario 2 sample of size `n` with `d_total` covariates.
pub fn gen_scenario2<R: Rng + ?Sized>(n: usize, rng: &mut R, d_total: usize) -> Result<Dataset> {
    Scenario::two(d_total)?.generate(n, rng)
}
