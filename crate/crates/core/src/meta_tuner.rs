//! Accuracy tuning by hedging over a geometric grid of many-experts copies.
//!
//! `R = ceil(log2 T)` copies run at `eps_r = 2^(1 - r)`. A Hedge instance
//! over the copies picks one each round and the learner plays that copy's
//! action. Every copy sees the full loss function and evolves exactly as it
//! would standalone, because each draws only from its own random stream.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{
    entropy, sample_categorical, Algorithm, CopyRun, ExpertId, FeedbackMode, GameRng,
    GameTrajectory, LossOracle, MetaSummary, Round, RoundRecord,
};
use crate::hedge::{check_horizon, HedgeState};
use crate::many_experts::PackingState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLevel {
    /// 1-based level index `r`.
    pub level: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    pub levels: Vec<GridLevel>,
}

impl EpsilonGrid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.epsilon).collect()
    }
}

/// `ceil(log2 T)` levels with accuracies `1, 1/2, 1/4, ...`.
pub fn build_grid(horizon: Round) -> Result<EpsilonGrid> {
    if horizon < 2 {
        return Err(invalid("T", "the accuracy grid needs T >= 2"));
    }
    let levels = (usize::BITS - (horizon - 1).leading_zeros()) as usize;
    Ok(EpsilonGrid {
        levels: (1..=levels)
            .map(|r| GridLevel {
                level: r,
                epsilon: 2f64.powi(1 - r as i32),
            })
            .collect(),
    })
}

/// Random stream used by copy `level` (1-based) under the meta learner's seed.
/// The meta learner itself draws from the stream it was handed.
pub fn copy_stream(meta_stream: u64, level: usize) -> u64 {
    meta_stream.wrapping_mul(1 << 16).wrapping_add(level as u64)
}

/// Live state of the meta procedure.
#[derive(Debug, Clone)]
pub struct MetaState {
    grid: EpsilonGrid,
    copies: Vec<PackingState>,
    copy_rngs: Vec<GameRng>,
    meta: HedgeState,
    feedback: FeedbackMode,
}

impl MetaState {
    pub fn new(
        grid: EpsilonGrid,
        feedback: FeedbackMode,
        seed: u64,
        meta_stream: u64,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("grid", "need at least one level"));
        }
        let copies = grid
            .levels
            .iter()
            .map(|l| PackingState::new(l.epsilon, ExpertId(0)))
            .collect::<Result<Vec<_>>>()?;
        let copy_rngs = grid
            .levels
            .iter()
            .map(|l| GameRng::new(seed, copy_stream(meta_stream, l.level)))
            .collect();
        let meta = HedgeState::new(grid.len())?;
        Ok(MetaState {
            grid,
            copies,
            copy_rngs,
            meta,
            feedback,
        })
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.grid
    }

    pub fn copies(&self) -> &[PackingState] {
        &self.copies
    }

    pub fn meta(&self) -> &HedgeState {
        &self.meta
    }

    pub fn feedback(&self) -> FeedbackMode {
        self.feedback
    }
}

/// Runs the meta procedure with expected-loss feedback.
pub fn play_meta(
    oracle: &dyn LossOracle,
    horizon: Round,
    rng: &mut GameRng,
) -> Result<GameTrajectory> {
    play_meta_with(oracle, horizon, FeedbackMode::Expected, rng)
}

pub fn play_meta_with(
    oracle: &dyn LossOracle,
    horizon: Round,
    feedback: FeedbackMode,
    rng: &mut GameRng,
) -> Result<GameTrajectory> {
    check_horizon(oracle, horizon)?;
    let grid = build_grid(horizon)?;
    let mut state = MetaState::new(grid, feedback, rng.seed(), rng.stream())?;
    let copies = state.copies.len();

    let mut trajectory = GameTrajectory::new(Algorithm::MetaTuner, rng, horizon);
    let mut copy_trajectories: Vec<GameTrajectory> = state
        .copy_rngs
        .iter()
        .map(|r| GameTrajectory::new(Algorithm::ManyExperts, r, horizon))
        .collect();
    let mut expected_cumulative = vec![0.0; copies];
    let mut chosen_copy = Vec::with_capacity(horizon);
    let mut meta_p = Vec::with_capacity(copies);
    let mut feedback_losses = vec![0.0; copies];
    let mut largest_packing = 1;

    for t in 1..=horizon {
        state.meta.distribution_into(&mut meta_p);
        let pick = sample_categorical(&meta_p, rng)?.0;

        let mut played = None;
        for (r, (copy, copy_rng)) in state
            .copies
            .iter_mut()
            .zip(state.copy_rngs.iter_mut())
            .enumerate()
        {
            let step = copy.step(t, oracle, copy_rng)?;
            expected_cumulative[r] += step.expected;
            feedback_losses[r] = match state.feedback {
                FeedbackMode::Expected => step.expected,
                FeedbackMode::Realized => step.incurred,
            };
            if r == pick {
                played = Some((step.chosen, step.incurred, step.phase));
            }
            copy_trajectories[r].push(RoundRecord {
                t,
                chosen: step.chosen,
                incurred: step.incurred,
                packing_size: step.packing_size,
                phase: step.phase,
                entropy: step.entropy,
            });
            largest_packing = largest_packing.max(step.packing_size);
        }
        let (chosen, incurred, phase) = played.expect("meta pick indexes a copy");
        trajectory.push(RoundRecord {
            t,
            chosen,
            incurred,
            packing_size: largest_packing,
            phase,
            entropy: entropy(&meta_p),
        });
        chosen_copy.push(pick);
        state.meta.update(&feedback_losses)?;
    }

    let copies = state
        .grid
        .levels
        .iter()
        .zip(state.copies.iter())
        .zip(copy_trajectories)
        .zip(expected_cumulative)
        .map(|(((level, copy), mut traj), expected)| {
            traj.packing = Some(copy.summary());
            CopyRun {
                level: level.level,
                epsilon: level.epsilon,
                expected_cumulative: expected,
                trajectory: traj,
            }
        })
        .collect();
    trajectory.meta = Some(MetaSummary {
        feedback,
        chosen_copy,
        copies,
    });
    Ok(trajectory)
}
