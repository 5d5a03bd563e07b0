//! Approximately low-rank loss matrices `L = clip(U W + E)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::generator_rng;
use crate::environments::matrix::{LossMatrix, Matrix};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRank {
    pub losses: LossMatrix,
    /// `T x d`, already rescaled so that `|U W| <= 1 - noise`.
    pub left: Matrix,
    /// `d x K`.
    pub right: Matrix,
    /// `T x K`, entries in `[-noise, noise]`.
    pub noise: Matrix,
    pub noise_level: f64,
}

pub fn make_low_rank(
    rounds: usize,
    experts: usize,
    rank: usize,
    noise_level: f64,
    seed: u64,
) -> Result<LowRank> {
    if rounds < 1 || experts < 1 {
        return Err(invalid("T/K", "need at least one round and one expert"));
    }
    if rank > rounds.min(experts) {
        return Err(invalid(
            "d",
            format!("rank {rank} exceeds min(T, K) = {}", rounds.min(experts)),
        ));
    }
    if !(0.0..=0.25).contains(&noise_level) {
        return Err(invalid(
            "epsilon_noise",
            format!("{noise_level} is not in [0, 1/4]"),
        ));
    }
    let mut rng = generator_rng(seed);
    let mut left = Matrix::from_fn(rounds, rank, |_, _| rng.random_range(-1.0..=1.0));
    let right = Matrix::from_fn(rank, experts, |_, _| rng.random_range(-1.0..=1.0));
    let product = left.matmul(&right)?;
    let peak = product.max_abs();
    let scale = if peak > 0.0 {
        (1.0 - noise_level) / peak
    } else {
        1.0
    };
    for r in 0..rounds {
        for v in left.row_mut(r) {
            *v *= scale;
        }
    }
    let structure = left.matmul(&right)?;
    let noise = Matrix::from_fn(rounds, experts, |_, _| {
        if noise_level > 0.0 {
            rng.random_range(-noise_level..=noise_level)
        } else {
            0.0
        }
    });
    let losses = Matrix::from_fn(rounds, experts, |r, c| {
        (structure.get(r, c) + noise.get(r, c)).clamp(-1.0, 1.0)
    });
    Ok(LowRank {
        losses: LossMatrix::new(losses)?,
        left,
        right,
        noise,
        noise_level,
    })
}

impl LowRank {
    /// Entrywise `max |L - U W|`.
    pub fn residual(&self) -> f64 {
        let structure = self.left.matmul(&self.right).expect("factor shapes agree");
        self.losses
            .matrix()
            .data()
            .iter()
            .zip(structure.data())
            .fold(0.0, |m, (l, s)| m.max((l - s).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_within_noise_and_range_respected() {
        for (d, eps) in [(1, 0.0), (2, 0.1), (3, 0.25)] {
            let env = make_low_rank(20, 30, d, eps, 7).unwrap();
            assert!(env.residual() <= eps + 1e-12);
            assert!(env.losses.matrix().max_abs() <= 1.0);
        }
    }

    #[test]
    fn rank_one_columns_are_multiples_of_one_profile() {
        let env = make_low_rank(6, 10, 1, 0.0, 3).unwrap();
        let base = env.losses.column(0);
        for i in 1..10 {
            let col = env.losses.column(i);
            let ratio = env.right.get(0, i) / env.right.get(0, 0);
            for (a, b) in col.iter().zip(&base) {
                assert!((a - ratio * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_rank_still_in_range() {
        let env = make_low_rank(5, 5, 5, 0.0, 1).unwrap();
        assert!(env.losses.matrix().max_abs() <= 1.0);
        assert!((env.left.matmul(&env.right).unwrap().max_abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(make_low_rank(3, 10, 4, 0.1, 0).is_err());
        assert!(make_low_rank(10, 10, 2, 0.3, 0).is_err());
        assert!(make_low_rank(0, 10, 0, 0.1, 0).is_err());
    }
}
