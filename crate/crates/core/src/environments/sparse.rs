//! Losses approximated by a sparse combination of dictionary atoms:
//! `L = clip(D V + E)` with unit-1-norm dictionary rows and `k`-sparse codes.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::generator_rng;
use crate::environments::matrix::{LossMatrix, Matrix};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDictionary {
    pub losses: LossMatrix,
    /// `T x n`, each row with 1-norm at most 1.
    pub dictionary: Matrix,
    /// `n x K`, each column `k`-sparse with entries in `[-1, 1]`.
    pub codes: Matrix,
    pub noise: Matrix,
    pub sparsity: usize,
    pub noise_level: f64,
}

pub fn make_sparse_dictionary(
    rounds: usize,
    experts: usize,
    atoms: usize,
    sparsity: usize,
    noise_level: f64,
    seed: u64,
) -> Result<SparseDictionary> {
    if rounds < 1 || experts < 1 || atoms < 1 {
        return Err(invalid("T/K/n", "need at least one round, expert and atom"));
    }
    if sparsity > atoms {
        return Err(invalid(
            "k",
            format!("sparsity {sparsity} exceeds {atoms} atoms"),
        ));
    }
    if !(0.0..=0.25).contains(&noise_level) {
        return Err(invalid(
            "epsilon_noise",
            format!("{noise_level} is not in [0, 1/4]"),
        ));
    }
    let mut rng = generator_rng(seed);
    let mut dictionary = Matrix::from_fn(rounds, atoms, |_, _| rng.random_range(-1.0..=1.0));
    for r in 0..rounds {
        let row = dictionary.row_mut(r);
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    let mut codes = Matrix::zeros(atoms, experts);
    for i in 0..experts {
        for a in index::sample(&mut rng, atoms, sparsity) {
            codes.set(a, i, rng.random_range(-1.0..=1.0));
        }
    }
    let structure = dictionary.matmul(&codes)?;
    let noise = Matrix::from_fn(rounds, experts, |_, _| {
        if noise_level > 0.0 {
            rng.random_range(-noise_level..=noise_level)
        } else {
            0.0
        }
    });
    // |D v| <= 1, so clipping only moves entries toward D v
    let losses = Matrix::from_fn(rounds, experts, |r, c| {
        (structure.get(r, c) + noise.get(r, c)).clamp(-1.0, 1.0)
    });
    Ok(SparseDictionary {
        losses: LossMatrix::new(losses)?,
        dictionary,
        codes,
        noise,
        sparsity,
        noise_level,
    })
}

impl SparseDictionary {
    /// Entrywise `max |L - D V|`.
    pub fn residual(&self) -> f64 {
        let structure = self
            .dictionary
            .matmul(&self.codes)
            .expect("factor shapes agree");
        self.losses
            .matrix()
            .data()
            .iter()
            .zip(structure.data())
            .fold(0.0, |m, (l, s)| m.max((l - s).abs()))
    }

    /// `max_a |v_i(a) - v_j(a)|` between two experts' codes.
    pub fn code_distance(&self, i: usize, j: usize) -> f64 {
        (0..self.codes.rows()).fold(0.0, |m, a| {
            m.max((self.codes.get(a, i) - self.codes.get(a, j)).abs())
        })
    }
}
