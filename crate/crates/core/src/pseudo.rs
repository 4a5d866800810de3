//! Doubly-robust (AIPW) pseudo-outcomes.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceFit;

/// `χ = [μ(1,w) - μ(0,w)] + (a - π)/(π(1 - π)) · (y - μ(a,w))`.
pub fn pseudo_outcome(a: u8, y: f64, pi: f64, mu0: f64, mu1: f64) -> f64 {
    let a_real = f64::from(a);
    let mu_a = if a == 1 { mu1 } else { mu0 };
    (mu1 - mu0) + (a_real - pi) / (pi * (1.0 - pi)) * (y - mu_a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcomes {
    pub chi: Vec<f64>,
}

impl PseudoOutcomes {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.chi.iter().sum::<f64>() / self.chi.len() as f64
    }
}

pub fn compute_pseudo(dataset: &Dataset, nf: &NuisanceFit) -> Result<PseudoOutcomes> {
    if nf.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            context: "pseudo-outcome nuisances",
            expected: dataset.len(),
            actual: nf.len(),
        });
    }
    let chi: Vec<f64> = dataset
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| pseudo_outcome(r.a, r.y, nf.pi_hat[i], nf.mu0_hat[i], nf.mu1_hat[i]))
        .collect();
    if chi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pseudo-outcomes"));
    }
    Ok(PseudoOutcomes { chi })
}
