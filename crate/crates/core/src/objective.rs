//! Training objective: per-step cross-entropy, the doubly stochastic
//! attention penalty and L2 weight decay.
//!
//! Terms are unnormalized sums over time steps; averaging over blocks is the
//! trainer's job.

use crate::error::{Error, Result};
use crate::model::ParamSet;

/// Predictions are clamped here before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Attention penalty coefficient.
    pub lambda: f64,
    /// Weight decay coefficient.
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 1e-5,
        }
    }
}

impl LossConfig {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        Self { lambda, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    pub attention_penalty: f64,
    pub weight_decay: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(cross_entropy: f64, attention_penalty: f64, weight_decay: f64) -> Self {
        Self {
            cross_entropy,
            attention_penalty,
            weight_decay,
            total: cross_entropy + attention_penalty + weight_decay,
        }
    }
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

fn target_index(target: &[f64]) -> Result<usize> {
    let ones: Vec<usize> = target
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1.0)
        .map(|(i, _)| i)
        .collect();
    let zeros = target.iter().filter(|&&v| v == 0.0).count();
    match ones.as_slice() {
        [i] if zeros + 1 == target.len() => Ok(*i),
        _ => Err(Error::Data(format!("target {target:?} is not one-hot"))),
    }
}

/// `-Σ_t Σ_i y_{t,i} log ŷ_{t,i}` with one-hot targets.
pub fn cross_entropy_term(y_hats: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if y_hats.len() != targets.len() {
        return Err(Error::dim(
            "cross_entropy_term",
            &[y_hats.len()],
            &[targets.len()],
        ));
    }
    let mut idx = Vec::with_capacity(targets.len());
    for (y, target) in y_hats.iter().zip(targets) {
        if y.len() != target.len() {
            return Err(Error::dim(
                "cross_entropy_term",
                &[y.len()],
                &[target.len()],
            ));
        }
        idx.push(target_index(target)?);
    }
    let refs: Vec<&[f64]> = y_hats.iter().map(Vec::as_slice).collect();
    cross_entropy_indices(&refs, &idx)
}

/// Cross-entropy with targets given as class indices.
pub fn cross_entropy_indices(y_hats: &[&[f64]], targets: &[usize]) -> Result<f64> {
    if y_hats.len() != targets.len() {
        return Err(Error::dim(
            "cross_entropy",
            &[y_hats.len()],
            &[targets.len()],
        ));
    }
    let mut total = 0.0;
    for (y, &c) in y_hats.iter().zip(targets) {
        let p = y
            .get(c)
            .ok_or_else(|| Error::Data(format!("target class {c} out of range")))?;
        total -= p.max(LOG_CLAMP).ln();
    }
    Ok(total)
}

fn region_mass(ls: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = ls.first() else {
        return Ok(Vec::new());
    };
    let mut mass = vec![0.0; first.len()];
    for l in ls {
        if l.len() != mass.len() {
            return Err(Error::dim("attention_penalty", &[l.len()], &[mass.len()]));
        }
        mass.iter_mut().zip(l).for_each(|(m, v)| *m += v);
    }
    Ok(mass)
}

/// `λ Σ_i (1 - Σ_t l_{t,i})²`.
pub fn attention_penalty_term(ls: &[Vec<f64>], lambda: f64) -> Result<f64> {
    let mass = region_mass(ls)?;
    Ok(lambda * mass.iter().map(|s| (1.0 - s).powi(2)).sum::<f64>())
}

/// Gradient of the penalty w.r.t. `l_{t,i}`; it does not depend on `t`.
pub fn attention_penalty_grad(ls: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    region_mass(ls)
        .unwrap_or_default()
        .iter()
        .map(|s| -2.0 * lambda * (1.0 - s))
        .collect()
}

/// `γ Σ θ²` over every weight and bias.
pub fn weight_decay_term<P: ParamSet>(params: &P, gamma: f64) -> f64 {
    gamma
        * params
            .tensors()
            .iter()
            .map(|t| t.sum_squares())
            .sum::<f64>()
}

pub fn total_loss<P: ParamSet>(
    y_hats: &[Vec<f64>],
    targets: &[Vec<f64>],
    ls: &[Vec<f64>],
    params: &P,
    config: &LossConfig,
) -> Result<LossBreakdown> {
    config.validate()?;
    Ok(LossBreakdown::new(
        cross_entropy_term(y_hats, targets)?,
        attention_penalty_term(ls, config.lambda)?,
        weight_decay_term(params, config.gamma),
    ))
}
