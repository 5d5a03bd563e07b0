//! Exponential Weights over a fixed finite expert set with the anytime
//! learning rate `eta_t = sqrt(8 ln K / t)`.
//!
//! Weights live in the log domain and are normalized by subtracting the
//! maximum before exponentiating, so long games with large cumulative losses
//! neither overflow nor collapse to NaN.

use crate::error::{invalid, Error, Result};
use crate::game::{
    entropy, sample_categorical, Algorithm, GameRng, GameTrajectory, LossOracle, Round, RoundRecord,
};

/// `sqrt(8 ln(K) / t)`; zero for a single expert.
pub fn learning_rate(t: Round, experts: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("t", "round index must be at least 1"));
    }
    if experts < 1 {
        return Err(invalid("K", "need at least one expert"));
    }
    Ok((8.0 * (experts as f64).ln() / t as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeState {
    log_weights: Vec<f64>,
    t: Round,
}

impl HedgeState {
    /// Fresh state over `experts` experts, all with weight 1, at round 1.
    pub fn new(experts: usize) -> Result<Self> {
        if experts < 1 {
            return Err(invalid("K", "need at least one expert"));
        }
        Ok(HedgeState {
            log_weights: vec![0.0; experts],
            t: 1,
        })
    }

    /// State with explicit log-weights, positioned at round `t`.
    pub fn from_log_weights(log_weights: Vec<f64>, t: Round) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(invalid("log_weights", "need at least one expert"));
        }
        if log_weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("log_weights", "all log-weights must be finite"));
        }
        if t < 1 {
            return Err(invalid("t", "round index must be at least 1"));
        }
        Ok(HedgeState { log_weights, t })
    }

    pub fn experts(&self) -> usize {
        self.log_weights.len()
    }

    /// Round the next update will be applied at.
    pub fn round(&self) -> Round {
        self.t
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Learning rate that the next update will use.
    pub fn current_rate(&self) -> f64 {
        (8.0 * (self.experts() as f64).ln() / self.t as f64).sqrt()
    }

    pub fn distribution(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.experts());
        self.distribution_into(&mut p);
        p
    }

    pub fn distribution_into(&self, out: &mut Vec<f64>) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        out.clear();
        out.extend(self.log_weights.iter().map(|w| (w - max).exp()));
        let total: f64 = out.iter().sum();
        for p in out.iter_mut() {
            *p /= total;
        }
    }

    /// Applies one round of losses with this round's learning rate and
    /// advances the clock.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.experts() {
            return Err(Error::LengthMismatch {
                expected: self.experts(),
                found: losses.len(),
            });
        }
        let eta = self.current_rate();
        if eta > 0.0 {
            for (w, l) in self.log_weights.iter_mut().zip(losses) {
                *w -= eta * l;
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Resets to uniform weights over `experts` experts at round 1.
    pub fn reset(&mut self, experts: usize) {
        self.log_weights.clear();
        self.log_weights.resize(experts, 0.0);
        self.t = 1;
    }
}

/// Plays Exponential Weights against `oracle` for `horizon` rounds.
pub fn play_hedge(
    oracle: &dyn LossOracle,
    horizon: Round,
    rng: &mut GameRng,
) -> Result<GameTrajectory> {
    let experts = oracle.num_experts().finite()?;
    check_horizon(oracle, horizon)?;
    let mut state = HedgeState::new(experts)?;
    let mut trajectory = GameTrajectory::new(Algorithm::Hedge, rng, horizon);
    let mut p = Vec::with_capacity(experts);
    let mut row = Vec::with_capacity(experts);
    for t in 1..=horizon {
        state.distribution_into(&mut p);
        let chosen = sample_categorical(&p, rng)?;
        oracle.round_losses(t, &mut row)?;
        trajectory.push(RoundRecord {
            t,
            chosen,
            incurred: row[chosen.0],
            packing_size: experts,
            phase: 1,
            entropy: entropy(&p),
        });
        state.update(&row)?;
    }
    Ok(trajectory)
}

pub(crate) fn check_horizon(oracle: &dyn LossOracle, horizon: Round) -> Result<()> {
    if horizon < 1 {
        return Err(invalid("T", "horizon must be at least 1"));
    }
    if horizon > oracle.horizon() {
        return Err(invalid(
            "T",
            format!(
                "horizon {horizon} exceeds the environment's {} rounds",
                oracle.horizon()
            ),
        ));
    }
    Ok(())
}
