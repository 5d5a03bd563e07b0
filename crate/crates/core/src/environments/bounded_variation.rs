//! The halving adversary: every expert starts at loss `-1`; each round a
//! uniformly random half (rounded down) of the experts still at `-1` flips to
//! `+1` for good. Each expert changes at most once, so its variation is at
//! most 2, yet when `K >= 2^T` some expert keeps loss `-1` throughout.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::environments::generator_rng;
use crate::environments::matrix::{LossMatrix, Matrix};
use crate::error::{invalid, Result};
use crate::game::{scan_uncovered, ExpertCount, ExpertId, LossOracle, Round};

const NEVER: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedVariation {
    rounds: usize,
    /// Round at which each expert flips to `+1`, or `usize::MAX` if never.
    flip_round: Vec<usize>,
}

pub fn make_bounded_variation_adversary(
    rounds: usize,
    experts: usize,
    seed: u64,
) -> Result<BoundedVariation> {
    if experts < 2 {
        return Err(invalid(
            "K",
            "the halving adversary needs at least 2 experts",
        ));
    }
    if rounds < 1 {
        return Err(invalid("T", "need at least one round"));
    }
    if rounds >= usize::BITS as usize || experts < 1 << rounds {
        log::warn!(
            "K = {experts} < 2^T with T = {rounds}: survivors run out before the last round"
        );
    }
    let mut rng = generator_rng(seed);
    let mut survivors: Vec<usize> = (0..experts).collect();
    let mut flip_round = vec![NEVER; experts];
    for t in 1..=rounds {
        let flips = survivors.len() / 2;
        let (chosen, _) = survivors.partial_shuffle(&mut rng, flips);
        for &i in chosen.iter() {
            flip_round[i] = t;
        }
        // partial_shuffle moves the chosen ones to the back
        survivors.truncate(survivors.len() - flips);
    }
    Ok(BoundedVariation { rounds, flip_round })
}

impl BoundedVariation {
    pub fn experts(&self) -> usize {
        self.flip_round.len()
    }

    pub fn flip_round(&self, expert: ExpertId) -> Option<Round> {
        match self.flip_round[expert.0] {
            NEVER => None,
            t => Some(t),
        }
    }

    /// Experts still at `-1` after round `t`.
    pub fn survivors_after(&self, t: Round) -> usize {
        self.flip_round.iter().filter(|&&f| f > t).count()
    }

    pub fn to_matrix(&self) -> LossMatrix {
        let m = Matrix::from_fn(self.rounds, self.experts(), |r, i| self.value(r + 1, i));
        LossMatrix::new(m).expect("unit losses are in range")
    }

    fn value(&self, t: Round, i: usize) -> f64 {
        if self.flip_round[i] <= t {
            1.0
        } else {
            -1.0
        }
    }
}

impl LossOracle for BoundedVariation {
    fn loss(&self, t: Round, expert: ExpertId) -> f64 {
        self.value(t, expert.0)
    }

    fn num_experts(&self) -> ExpertCount {
        ExpertCount::Finite(self.experts())
    }

    fn horizon(&self) -> Round {
        self.rounds
    }

    fn uncovered_expert_from(
        &self,
        t: Round,
        active: &[ExpertId],
        threshold: f64,
        start: usize,
    ) -> Option<ExpertId> {
        scan_uncovered(self.experts(), start, active, threshold, |i| {
            self.value(t, i)
        })
    }

    fn cumulative_losses(&self) -> Result<Vec<f64>> {
        let t = self.rounds as f64;
        Ok(self
            .flip_round
            .iter()
            .map(|&f| {
                if f == NEVER {
                    -t
                } else {
                    let minus = (f - 1) as f64;
                    (t - minus) - minus
                }
            })
            .collect())
    }
}
