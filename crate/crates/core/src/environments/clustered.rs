//! Binary `±1` losses where many experts share a small number of distinct
//! loss sequences.
//!
//! The environment stores one row per cluster plus an expert-to-cluster
//! assignment, so a hundred thousand experts over thousands of rounds stays
//! cheap. Coverage queries scan clusters instead of experts.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::generator_rng;
use crate::environments::matrix::{LossMatrix, Matrix};
use crate::error::{invalid, Error, Result};
use crate::game::{ExpertCount, ExpertId, LossOracle, Round};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredBinary {
    rounds: usize,
    /// One `±1` sequence per cluster, row-major `clusters x rounds`.
    patterns: Vec<f64>,
    assignment: Vec<u32>,
    /// Sorted member lists per cluster.
    members: Vec<Vec<usize>>,
}

/// Ground truth exposed for analysis and export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub clusters: usize,
    pub assignment: Vec<u32>,
}

pub fn make_clustered_binary(
    rounds: usize,
    experts: usize,
    clusters: usize,
    seed: u64,
) -> Result<ClusteredBinary> {
    if rounds < 1 {
        return Err(invalid("T", "need at least one round"));
    }
    if clusters < 1 {
        return Err(invalid("N", "need at least one cluster"));
    }
    if clusters > experts {
        return Err(invalid(
            "N",
            format!("{clusters} clusters but only {experts} experts"),
        ));
    }
    if rounds < usize::BITS as usize && clusters > 1usize << rounds {
        return Err(Error::TooManyDistinctRows {
            requested: clusters,
            rounds,
        });
    }
    let mut rng = generator_rng(seed);
    let patterns = distinct_sign_rows(rounds, clusters, &mut rng);

    // one guaranteed member per cluster, the rest uniform
    let mut assignment: Vec<u32> = (0..experts)
        .map(|_| rng.random_range(0..clusters) as u32)
        .collect();
    for (cluster, expert) in index::sample(&mut rng, experts, clusters)
        .into_iter()
        .enumerate()
    {
        assignment[expert] = cluster as u32;
    }
    let mut members = vec![Vec::new(); clusters];
    for (i, &c) in assignment.iter().enumerate() {
        members[c as usize].push(i);
    }
    Ok(ClusteredBinary {
        rounds,
        patterns,
        assignment,
        members,
    })
}

fn distinct_sign_rows<R: Rng>(rounds: usize, count: usize, rng: &mut R) -> Vec<f64> {
    let sign = |bit: bool| if bit { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(count * rounds);
    if rounds <= 20 {
        for code in index::sample(rng, 1usize << rounds, count) {
            out.extend((0..rounds).map(|t| sign((code >> t) & 1 == 1)));
        }
    } else {
        let mut seen = HashSet::with_capacity(count);
        while seen.len() < count {
            let row: Vec<bool> = (0..rounds).map(|_| rng.random()).collect();
            if seen.insert(row.clone()) {
                out.extend(row.into_iter().map(sign));
            }
        }
    }
    out
}

impl ClusteredBinary {
    pub fn experts(&self) -> usize {
        self.assignment.len()
    }

    pub fn clusters(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, expert: ExpertId) -> usize {
        self.assignment[expert.0] as usize
    }

    pub fn pattern(&self, cluster: usize) -> &[f64] {
        &self.patterns[cluster * self.rounds..(cluster + 1) * self.rounds]
    }

    pub fn truth(&self) -> ClusterTruth {
        ClusterTruth {
            clusters: self.clusters(),
            assignment: self.assignment.clone(),
        }
    }

    /// `clusters x rounds` matrix of the distinct sequences.
    pub fn patterns_matrix(&self) -> Matrix {
        Matrix::from_vec(self.clusters(), self.rounds, self.patterns.clone()).expect("shape")
    }

    pub fn to_matrix(&self) -> LossMatrix {
        let k = self.experts();
        let m = Matrix::from_fn(self.rounds, k, |r, i| {
            self.pattern(self.assignment[i] as usize)[r]
        });
        LossMatrix::new(m).expect("binary losses are in range")
    }
}

impl LossOracle for ClusteredBinary {
    fn loss(&self, t: Round, expert: ExpertId) -> f64 {
        self.patterns[self.assignment[expert.0] as usize * self.rounds + t - 1]
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
        let anchors: Vec<f64> = active.iter().map(|&e| self.loss(t, e)).collect();
        (0..self.clusters())
            .filter(|&c| {
                let v = self.patterns[c * self.rounds + t - 1];
                anchors.iter().all(|a| (v - a).abs() > threshold)
            })
            .filter_map(|c| {
                let m = &self.members[c];
                m.get(m.partition_point(|&i| i < start)).copied()
            })
            .min()
            .map(ExpertId)
    }

    fn round_losses(&self, t: Round, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.extend(
            self.assignment
                .iter()
                .map(|&c| self.patterns[c as usize * self.rounds + t - 1]),
        );
        Ok(())
    }

    fn cumulative_losses(&self) -> Result<Vec<f64>> {
        let per_cluster: Vec<f64> = (0..self.clusters())
            .map(|c| self.pattern(c).iter().sum())
            .collect();
        Ok(self
            .assignment
            .iter()
            .map(|&c| per_cluster[c as usize])
            .collect())
    }
}
