//! Shared vocabulary for expert-advice games: experts, rounds, loss access,
//! seeded randomness and trajectory recording.
//!
//! Rounds are 1-based throughout. Every loss an environment hands out lies in
//! `[-1, 1]`; values that graze the boundary by floating-point noise are
//! clamped by [`LossValue::new`], anything further out is rejected.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Round index, starting at 1.
pub type Round = usize;

/// Slack tolerated (and clamped away) when a loss exceeds the unit range.
pub const LOSS_CLAMP_SLACK: f64 = 1e-12;

/// Index of an expert inside an environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertId(pub usize);

impl ExpertId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ExpertId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for ExpertId {
    fn from(i: usize) -> Self {
        ExpertId(i)
    }
}

/// A validated loss in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossValue(f64);

impl LossValue {
    /// Validates `value`, clamping overshoots smaller than [`LOSS_CLAMP_SLACK`].
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::LossOutOfRange(value));
        }
        if value.abs() <= 1.0 {
            return Ok(LossValue(value));
        }
        if value.abs() - 1.0 < LOSS_CLAMP_SLACK {
            log::warn!("loss {value:e} exceeds unit range by rounding noise; clamping");
            return Ok(LossValue(value.clamp(-1.0, 1.0)));
        }
        Err(Error::LossOutOfRange(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Size of an environment's expert set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertCount {
    Finite(usize),
    Unbounded,
}

impl ExpertCount {
    pub fn finite(self) -> Result<usize> {
        match self {
            ExpertCount::Finite(k) => Ok(k),
            ExpertCount::Unbounded => Err(Error::UnboundedExperts),
        }
    }
}

/// Full-information access to an environment's loss sequence.
///
/// `loss` must be deterministic for a fixed instance. `uncovered_expert_from`
/// returns the smallest-index expert `j >= start` whose round-`t` loss is
/// farther than `threshold` from every member of `active`, or `None` when no
/// such expert exists at or after `start`.
pub trait LossOracle: Send + Sync {
    fn loss(&self, t: Round, expert: ExpertId) -> f64;

    fn num_experts(&self) -> ExpertCount;

    fn horizon(&self) -> Round;

    fn uncovered_expert_from(
        &self,
        t: Round,
        active: &[ExpertId],
        threshold: f64,
        start: usize,
    ) -> Option<ExpertId>;

    fn uncovered_expert(&self, t: Round, active: &[ExpertId], threshold: f64) -> Option<ExpertId> {
        self.uncovered_expert_from(t, active, threshold, 0)
    }

    /// Round-`t` losses of the listed experts, written into `out`.
    fn losses_of(&self, t: Round, experts: &[ExpertId], out: &mut Vec<f64>) {
        out.clear();
        out.extend(experts.iter().map(|&e| self.loss(t, e)));
    }

    /// Round-`t` losses of every expert.
    fn round_losses(&self, t: Round, out: &mut Vec<f64>) -> Result<()> {
        let k = self.num_experts().finite()?;
        out.clear();
        out.extend((0..k).map(|i| self.loss(t, ExpertId(i))));
        Ok(())
    }

    /// Cumulative loss of every expert over the whole horizon.
    fn cumulative_losses(&self) -> Result<Vec<f64>> {
        let k = self.num_experts().finite()?;
        let mut sums = vec![0.0; k];
        let mut row = Vec::with_capacity(k);
        for t in 1..=self.horizon() {
            self.round_losses(t, &mut row)?;
            for (s, l) in sums.iter_mut().zip(&row) {
                *s += l;
            }
        }
        Ok(sums)
    }
}

/// Linear scan shared by the finite environments: first expert in
/// `start..count` whose loss is more than `threshold` away from all of
/// `active`.
pub fn scan_uncovered<F>(
    count: usize,
    start: usize,
    active: &[ExpertId],
    threshold: f64,
    loss_at: F,
) -> Option<ExpertId>
where
    F: Fn(usize) -> f64,
{
    let anchors: Vec<f64> = active.iter().map(|e| loss_at(e.0)).collect();
    (start..count)
        .find(|&j| {
            let lj = loss_at(j);
            anchors.iter().all(|&a| (lj - a).abs() > threshold)
        })
        .map(ExpertId)
}

/// Which learner drives a game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hedge,
    ManyExperts,
    MetaTuner,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Hedge => "hedge",
            Algorithm::ManyExperts => "many_experts",
            Algorithm::MetaTuner => "meta_tuner",
        })
    }
}

/// Parameters of one seeded game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub horizon: Round,
    pub epsilon: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        validate_epsilon(self.epsilon)?;
        if self.algorithm == Algorithm::MetaTuner && self.horizon < 2 {
            return Err(invalid("horizon", "meta tuning needs at least 2 rounds"));
        }
        Ok(())
    }
}

pub(crate) fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(invalid("epsilon", format!("{epsilon} is not in (0, 1]")))
    }
}

/// Seedable random stream identified by `(seed, stream)`.
///
/// Distinct stream ids under the same master seed give independent
/// sequences; this is how games in a sweep and copies inside the meta
/// procedure get their own randomness.
#[derive(Debug, Clone)]
pub struct GameRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl GameRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        GameRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for GameRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws an index with probability proportional to `weights`, consuming one
/// uniform variate from `rng`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<ExpertId> {
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::DegenerateDistribution);
        }
        total += w;
    }
    if weights.is_empty() || total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return Ok(ExpertId(i));
            }
        }
    }
    // rounding left `target` past the final partial sum
    Ok(ExpertId(last_positive))
}

/// Inner product of a probability vector with a loss vector.
pub fn expected_loss(distribution: &[f64], losses: &[f64]) -> Result<f64> {
    if distribution.len() != losses.len() {
        return Err(Error::LengthMismatch {
            expected: distribution.len(),
            found: losses.len(),
        });
    }
    let mass: f64 = distribution.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(invalid("distribution", format!("sums to {mass}, not 1")));
    }
    Ok(distribution.iter().zip(losses).map(|(p, l)| p * l).sum())
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(distribution: &[f64]) -> f64 {
    -distribution
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// One played round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: Round,
    pub chosen: ExpertId,
    pub incurred: f64,
    /// Active-set size the action was sampled from.
    pub packing_size: usize,
    /// Phase in effect when the action was sampled.
    pub phase: usize,
    /// Entropy of the sampling distribution.
    pub entropy: f64,
}

/// A restart of the many-experts learner: phase start round and active-set size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restart {
    pub at: Round,
    pub size: usize,
}

/// End-of-game packing bookkeeping of a many-experts run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSummary {
    pub epsilon: f64,
    /// Final active set in admission order.
    pub active: Vec<ExpertId>,
    /// Round each active expert was admitted at (0 for the initial expert).
    pub admitted_at: Vec<Round>,
    /// Phase history `(tau_r, K_r)`, starting with `(0, 1)`.
    pub restarts: Vec<Restart>,
}

/// How the meta learner scores its copies each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Each copy's expected loss under its own distribution.
    #[default]
    Expected,
    /// The loss of the action each copy actually sampled.
    Realized,
}

/// A copy of the many-experts learner as run inside the meta procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyRun {
    pub level: usize,
    pub epsilon: f64,
    /// Sum of the copy's per-round expected losses.
    pub expected_cumulative: f64,
    pub trajectory: GameTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSummary {
    pub feedback: FeedbackMode,
    /// Copy index (0-based) whose action was played at each round.
    pub chosen_copy: Vec<usize>,
    pub copies: Vec<CopyRun>,
}

/// Everything recorded about one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTrajectory {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub stream: u64,
    pub rounds: Vec<RoundRecord>,
    pub learner_cumulative: f64,
    pub packing: Option<PackingSummary>,
    pub meta: Option<MetaSummary>,
}

impl GameTrajectory {
    pub(crate) fn new(algorithm: Algorithm, rng: &GameRng, horizon: Round) -> Self {
        GameTrajectory {
            algorithm,
            seed: rng.seed(),
            stream: rng.stream(),
            rounds: Vec::with_capacity(horizon),
            learner_cumulative: 0.0,
            packing: None,
            meta: None,
        }
    }

    pub(crate) fn push(&mut self, record: RoundRecord) {
        self.learner_cumulative += record.incurred;
        self.rounds.push(record);
    }

    pub fn horizon(&self) -> Round {
        self.rounds.len()
    }

    /// Final active-set size (`K_p`); `None` for plain Hedge and meta games.
    pub fn final_packing_size(&self) -> Option<usize> {
        self.packing.as_ref().map(|p| p.active.len())
    }

    /// Number of phases (`p`); `None` for plain Hedge and meta games.
    pub fn phases(&self) -> Option<usize> {
        self.packing.as_ref().map(|p| p.restarts.len())
    }

    /// Running sum of incurred losses, one entry per round.
    pub fn cumulative_series(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.incurred;
                Some(*acc)
            })
            .collect()
    }

    /// Checks the recorded-sum and monotone-packing invariants.
    pub fn is_consistent(&self) -> bool {
        let sum: f64 = self.rounds.iter().map(|r| r.incurred).sum();
        let monotone = self
            .rounds
            .windows(2)
            .all(|w| w[0].packing_size <= w[1].packing_size);
        (sum - self.learner_cumulative).abs() <= 1e-9 && monotone
    }
}
