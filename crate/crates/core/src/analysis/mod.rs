//! Ground-truth measurement over realized loss matrices: sup-norm distances
//! between experts, covering and packing numbers (exact and greedy), the
//! covering/packing sandwich `P(2e) <= N(e) <= P(e)`, regret, variation and
//! the log-sum inequality used when summing phase regrets.

mod cover;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use cover::{
    covering_number_exact, maximum_packing, minimum_cover, packing_number_exact, DEFAULT_BUDGET,
    MAX_EXACT_EXPERTS,
};

use crate::environments::LossMatrix;
use crate::error::{invalid, Error, Result};
use crate::game::{ExpertId, GameRng, GameTrajectory, LossOracle, PackingSummary};

/// `max_t |l_t(i) - l_t(j)|`.
pub fn expert_distance(losses: &LossMatrix, i: ExpertId, j: ExpertId) -> Result<f64> {
    let k = losses.experts();
    for e in [i, j] {
        if e.0 >= k {
            return Err(Error::ExpertOutOfRange {
                index: e.0,
                count: k,
            });
        }
    }
    Ok((1..=losses.rounds())
        .map(|t| {
            let row = losses.round(t);
            (row[i.0] - row[j.0]).abs()
        })
        .fold(0.0, f64::max))
}

/// All pairwise distances, `K x K`.
pub fn distance_table(losses: &LossMatrix) -> Vec<Vec<f64>> {
    let k = losses.experts();
    let mut d = vec![vec![0.0; k]; k];
    for t in 1..=losses.rounds() {
        let row = losses.round(t);
        for i in 0..k {
            for j in (i + 1)..k {
                let gap = (row[i] - row[j]).abs();
                if gap > d[i][j] {
                    d[i][j] = gap;
                    d[j][i] = gap;
                }
            }
        }
    }
    d
}

/// Does every expert lie within `epsilon` of some member?
pub fn is_cover(losses: &LossMatrix, members: &[ExpertId], epsilon: f64) -> bool {
    let dist = distance_table(losses);
    (0..losses.experts()).all(|i| members.iter().any(|m| dist[i][m.0] <= epsilon))
}

/// Is every pair of members separated by more than `epsilon` at some round?
/// Works against any oracle by scanning all rounds.
pub fn is_packing(oracle: &dyn LossOracle, members: &[ExpertId], epsilon: f64) -> bool {
    let horizon = oracle.horizon();
    let mut row = Vec::with_capacity(members.len());
    let mut separated = vec![false; members.len() * members.len()];
    for t in 1..=horizon {
        oracle.losses_of(t, members, &mut row);
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                if (row[a] - row[b]).abs() > epsilon {
                    separated[a * members.len() + b] = true;
                }
            }
        }
    }
    (0..members.len()).all(|a| ((a + 1)..members.len()).all(|b| separated[a * members.len() + b]))
}

/// Checks the admission-round certificate of a many-experts run: for each
/// pair admitted in order `i` then `j`, the two differ by more than
/// `2 epsilon` at the round `j` was admitted.
pub fn admission_certificate_holds(oracle: &dyn LossOracle, packing: &PackingSummary) -> bool {
    let threshold = 2.0 * packing.epsilon;
    let n = packing.active.len();
    (0..n).all(|b| {
        let t = packing.admitted_at[b];
        b == 0 && t == 0
            || (t >= 1
                && (0..b).all(|a| {
                    packing.admitted_at[a] <= t
                        && (oracle.loss(t, packing.active[a]) - oracle.loss(t, packing.active[b]))
                            .abs()
                            > threshold
                }))
    })
}

/// Visiting order for greedy packing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingOrder {
    Index,
    Random(u64),
}

/// Greedily admits experts farther than `epsilon` from everything admitted
/// so far. The result is a maximal `epsilon`-packing and hence an
/// `epsilon`-cover.
pub fn packing_greedy(losses: &LossMatrix, epsilon: f64, order: PackingOrder) -> Vec<ExpertId> {
    let k = losses.experts();
    let mut visit: Vec<usize> = (0..k).collect();
    if let PackingOrder::Random(seed) = order {
        visit.shuffle(&mut GameRng::new(seed, 0));
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|i| losses.column(i)).collect();
    let far = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(x, y)| (x - y).abs() > epsilon);
    let mut admitted: Vec<usize> = Vec::new();
    for i in visit {
        if admitted.iter().all(|&a| far(&columns[a], &columns[i])) {
            admitted.push(i);
        }
    }
    admitted.into_iter().map(ExpertId).collect()
}

/// Covering and packing quantities at one accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub epsilon: f64,
    pub exact_cover: Option<usize>,
    pub exact_packing_at_eps: Option<usize>,
    pub exact_packing_at_2eps: Option<usize>,
    pub greedy_packing_at_eps: usize,
    pub greedy_packing_at_2eps: usize,
    pub witnesses: CoverWitnesses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverWitnesses {
    pub cover: Option<Vec<ExpertId>>,
    pub packing_at_eps: Option<Vec<ExpertId>>,
    pub packing_at_2eps: Option<Vec<ExpertId>>,
    pub greedy_at_eps: Vec<ExpertId>,
    pub greedy_at_2eps: Vec<ExpertId>,
}

impl CoverReport {
    /// `P(2e) <= N(e) <= P(e)` on the exact quantities, and the greedy
    /// sandwich around the exact cover. Vacuously true for missing fields.
    pub fn sandwich_holds(&self) -> bool {
        let exact = match (
            self.exact_packing_at_2eps,
            self.exact_cover,
            self.exact_packing_at_eps,
        ) {
            (Some(p2), Some(n), Some(p1)) => p2 <= n && n <= p1,
            _ => true,
        };
        let greedy = match self.exact_cover {
            Some(n) => self.greedy_packing_at_2eps <= n && n <= self.greedy_packing_at_eps,
            None => self.greedy_packing_at_2eps <= self.greedy_packing_at_eps,
        };
        exact && greedy
    }
}

pub fn duality_certificate(losses: &LossMatrix, epsilon: f64) -> Result<CoverReport> {
    duality_certificate_with_budget(losses, epsilon, DEFAULT_BUDGET)
}

/// Exact `N(e)`, `P(e)`, `P(2e)` plus greedy packings; exact fields are
/// absent past `budget`. Errors if the sandwich fails.
pub fn duality_certificate_with_budget(
    losses: &LossMatrix,
    epsilon: f64,
    budget: usize,
) -> Result<CoverReport> {
    let cover = minimum_cover(losses, epsilon, budget);
    let packing_at_eps = maximum_packing(losses, epsilon, budget);
    let packing_at_2eps = maximum_packing(losses, 2.0 * epsilon, budget);
    let greedy_at_eps = packing_greedy(losses, epsilon, PackingOrder::Index);
    let greedy_at_2eps = packing_greedy(losses, 2.0 * epsilon, PackingOrder::Index);
    let report = CoverReport {
        epsilon,
        exact_cover: cover.as_ref().map(Vec::len),
        exact_packing_at_eps: packing_at_eps.as_ref().map(Vec::len),
        exact_packing_at_2eps: packing_at_2eps.as_ref().map(Vec::len),
        greedy_packing_at_eps: greedy_at_eps.len(),
        greedy_packing_at_2eps: greedy_at_2eps.len(),
        witnesses: CoverWitnesses {
            cover,
            packing_at_eps,
            packing_at_2eps,
            greedy_at_eps,
            greedy_at_2eps,
        },
    };
    if !report.sandwich_holds() {
        return Err(Error::DualityViolation {
            epsilon,
            packing_2eps: report
                .exact_packing_at_2eps
                .unwrap_or(report.greedy_packing_at_2eps),
            cover: report.exact_cover.unwrap_or(0),
            packing_eps: report
                .exact_packing_at_eps
                .unwrap_or(report.greedy_packing_at_eps),
        });
    }
    Ok(report)
}

/// Learner's cumulative loss against the best fixed expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub learner_cumulative: f64,
    pub best_expert: ExpertId,
    pub best_cumulative: f64,
    pub regret: f64,
}

/// Regret given the experts' cumulative losses; ties go to the lowest index.
pub fn regret_from_totals(learner_cumulative: f64, expert_totals: &[f64]) -> Result<RegretLedger> {
    let (best, &best_cumulative) = expert_totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| invalid("experts", "no experts to compare against"))?;
    Ok(RegretLedger {
        learner_cumulative,
        best_expert: ExpertId(best),
        best_cumulative,
        regret: learner_cumulative - best_cumulative,
    })
}

pub fn empirical_regret(
    trajectory: &GameTrajectory,
    oracle: &dyn LossOracle,
) -> Result<RegretLedger> {
    if trajectory.horizon() != oracle.horizon() {
        return Err(Error::LengthMismatch {
            expected: oracle.horizon(),
            found: trajectory.horizon(),
        });
    }
    regret_from_totals(trajectory.learner_cumulative, &oracle.cumulative_losses()?)
}

/// `V(i) = sum_t |l_{t+1}(i) - l_t(i)|` for every expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationProfile {
    pub per_expert: Vec<f64>,
}

impl VariationProfile {
    pub fn max(&self) -> f64 {
        self.per_expert.iter().copied().fold(0.0, f64::max)
    }
}

pub fn variation_profile(losses: &LossMatrix) -> VariationProfile {
    let mut per_expert = vec![0.0; losses.experts()];
    for t in 1..losses.rounds() {
        for ((v, a), b) in per_expert
            .iter_mut()
            .zip(losses.round(t))
            .zip(losses.round(t + 1))
        {
            *v += (b - a).abs();
        }
    }
    VariationProfile { per_expert }
}

/// `sum ln a_i <= 2 a_n ln a_n` for `1 = a_1 < a_2 < ... < a_n`.
pub fn logsum_bound_check(sequence: &[u64]) -> Result<bool> {
    match sequence.first() {
        None => return Err(invalid("a", "sequence must be non-empty")),
        Some(&first) if first != 1 => return Err(invalid("a", "sequence must start at 1")),
        _ => {}
    }
    if sequence.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("a", "sequence must be strictly increasing"));
    }
    let sum: f64 = sequence.iter().map(|&a| (a as f64).ln()).sum();
    let last = *sequence.last().unwrap() as f64;
    Ok(sum <= 2.0 * last * last.ln())
}
