//! Stochastic environments: each round's losses are drawn independently
//! from a fixed per-expert distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::generator_rng;
use crate::environments::matrix::{LossMatrix, Matrix};
use crate::error::{invalid, Result};

/// Per-expert noise around the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IidNoise {
    /// Constant losses equal to the means.
    None,
    /// `mean + U[-width, width]`, clipped to `[-1, 1]`.
    Uniform { width: f64 },
    /// `±1` with `P(+1) = (1 + mean) / 2`, so the expectation is `mean`.
    Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidDistribution {
    pub means: Vec<f64>,
    pub noise: IidNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidStochastic {
    pub losses: LossMatrix,
    pub distribution: IidDistribution,
}

pub fn make_iid_stochastic(
    rounds: usize,
    distribution: IidDistribution,
    seed: u64,
) -> Result<IidStochastic> {
    if rounds < 1 {
        return Err(invalid("T", "need at least one round"));
    }
    if distribution.means.is_empty() {
        return Err(invalid("means", "need at least one expert"));
    }
    if let Some(m) = distribution
        .means
        .iter()
        .find(|m| !(-1.0..=1.0).contains(*m))
    {
        return Err(invalid("means", format!("{m} lies outside [-1, 1]")));
    }
    if let IidNoise::Uniform { width } = distribution.noise {
        if !(width.is_finite() && width >= 0.0) {
            return Err(invalid("noise.width", "must be finite and non-negative"));
        }
    }
    let mut rng = generator_rng(seed);
    let means = &distribution.means;
    let losses = Matrix::from_fn(rounds, means.len(), |_, i| match distribution.noise {
        IidNoise::None => means[i],
        IidNoise::Uniform { width } if width > 0.0 => {
            (means[i] + rng.random_range(-width..=width)).clamp(-1.0, 1.0)
        }
        IidNoise::Uniform { .. } => means[i],
        IidNoise::Sign => {
            if rng.random_bool((1.0 + means[i]) / 2.0) {
                1.0
            } else {
                -1.0
            }
        }
    });
    Ok(IidStochastic {
        losses: LossMatrix::new(losses)?,
        distribution,
    })
}
