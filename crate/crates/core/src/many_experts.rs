//! Exponential Weights for many experts.
//!
//! The learner keeps an active set `S` that grows into a `2 epsilon`-packing of
//! the realized loss sequence. Each round it samples from an inner Hedge over
//! `S`, then admits every expert whose loss is more than `2 epsilon` away from
//! all of `S`. Any admission triggers a restart: weights go back to 1 and the
//! learning-rate clock restarts, so the next rate uses `t - tau_r = 1`.
//! Rounds without admissions run the ordinary Hedge update on the old clock.

use crate::error::{invalid, Result};
use crate::game::{
    entropy, sample_categorical, validate_epsilon, Algorithm, ExpertCount, ExpertId, GameRng,
    GameTrajectory, LossOracle, PackingSummary, Restart, Round, RoundRecord,
};
use crate::hedge::{check_horizon, HedgeState};

/// `2 eps T + 2 p + 8 sqrt(T K_p ln K_p)`: the per-run regret bound of the
/// many-experts learner in terms of its final active-set size and phase count.
pub fn theorem1_bound(
    final_size: usize,
    phases: usize,
    epsilon: f64,
    horizon: Round,
) -> Result<f64> {
    if phases < 1 {
        return Err(invalid("p", "at least one phase"));
    }
    if phases > final_size {
        return Err(invalid(
            "p",
            format!("{phases} phases exceed K_p = {final_size}"),
        ));
    }
    if horizon < 1 {
        return Err(invalid("T", "horizon must be at least 1"));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid("epsilon", "must be finite and non-negative"));
    }
    let t = horizon as f64;
    let k = final_size as f64;
    Ok(2.0 * epsilon * t + 2.0 * phases as f64 + 8.0 * (t * k * k.ln()).sqrt())
}

/// Result of playing one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub chosen: ExpertId,
    pub incurred: f64,
    /// Expected loss of the sampling distribution at this round.
    pub expected: f64,
    pub packing_size: usize,
    pub phase: usize,
    pub entropy: f64,
    pub admitted: Vec<ExpertId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingState {
    active: Vec<ExpertId>,
    admitted_at: Vec<Round>,
    phase: usize,
    phase_start: Round,
    inner: HedgeState,
    epsilon: f64,
    restarts: Vec<Restart>,
    dist: Vec<f64>,
    losses: Vec<f64>,
}

impl PackingState {
    /// Phase 1 with `S = {initial}` and `tau_1 = 0`.
    pub fn new(epsilon: f64, initial: ExpertId) -> Result<Self> {
        validate_epsilon(epsilon)?;
        Ok(PackingState {
            active: vec![initial],
            admitted_at: vec![0],
            phase: 1,
            phase_start: 0,
            inner: HedgeState::new(1)?,
            epsilon,
            restarts: vec![Restart { at: 0, size: 1 }],
            dist: Vec::new(),
            losses: Vec::new(),
        })
    }

    pub fn active(&self) -> &[ExpertId] {
        &self.active
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn phase_start(&self) -> Round {
        self.phase_start
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn inner(&self) -> &HedgeState {
        &self.inner
    }

    pub fn restarts(&self) -> &[Restart] {
        &self.restarts
    }

    pub fn distribution(&self) -> Vec<f64> {
        self.inner.distribution()
    }

    /// Admits uncovered experts at round `t` until every expert lies within
    /// `2 epsilon` of some member of `S`. Returns the admitted experts in
    /// admission order.
    pub fn expand_packing(&mut self, t: Round, oracle: &dyn LossOracle) -> Vec<ExpertId> {
        let threshold = 2.0 * self.epsilon;
        let mut added = Vec::new();
        let mut start = 0;
        // everything below the last admitted index was covered and stays covered
        while let Some(j) = oracle.uncovered_expert_from(t, &self.active, threshold, start) {
            self.active.push(j);
            self.admitted_at.push(t);
            added.push(j);
            start = j.0 + 1;
        }
        added
    }

    /// Starts a new phase at round `t` over the current `S` with unit weights.
    pub fn restart(&mut self, t: Round) {
        debug_assert!(t > self.phase_start, "restart rounds must increase");
        debug_assert!(
            self.active.len() > self.restarts.last().map_or(0, |r| r.size),
            "a restart must follow an admission"
        );
        self.inner.reset(self.active.len());
        self.phase += 1;
        self.phase_start = t;
        self.restarts.push(Restart {
            at: t,
            size: self.active.len(),
        });
    }

    /// Plays round `t`: sample from the current phase, observe losses, grow
    /// the packing, then restart or update.
    pub fn step<R>(&mut self, t: Round, oracle: &dyn LossOracle, rng: &mut R) -> Result<StepOutcome>
    where
        R: rand::Rng + ?Sized,
    {
        // phase clock: the next rate is sqrt(8 ln K_r / (t - tau_r))
        assert_eq!(
            self.inner.round(),
            t - self.phase_start,
            "inner clock out of step with the phase start"
        );
        self.inner.distribution_into(&mut self.dist);
        let pick = sample_categorical(&self.dist, rng)?;
        oracle.losses_of(t, &self.active, &mut self.losses);
        let incurred = self.losses[pick.0];
        let expected: f64 = self.dist.iter().zip(&self.losses).map(|(p, l)| p * l).sum();
        let packing_size = self.active.len();
        let phase = self.phase;
        let h = entropy(&self.dist);

        let admitted = self.expand_packing(t, oracle);
        if admitted.is_empty() {
            self.inner.update(&self.losses)?;
        } else {
            self.restart(t);
        }
        Ok(StepOutcome {
            chosen: self.active[pick.0],
            incurred,
            expected,
            packing_size,
            phase,
            entropy: h,
            admitted,
        })
    }

    pub fn summary(&self) -> PackingSummary {
        PackingSummary {
            epsilon: self.epsilon,
            active: self.active.clone(),
            admitted_at: self.admitted_at.clone(),
            restarts: self.restarts.clone(),
        }
    }
}

/// Plays the many-experts learner from expert 0.
pub fn play_many_experts(
    oracle: &dyn LossOracle,
    horizon: Round,
    epsilon: f64,
    rng: &mut GameRng,
) -> Result<GameTrajectory> {
    play_many_experts_from(oracle, horizon, epsilon, ExpertId(0), rng)
}

/// Plays the many-experts learner with `S` initialised to `initial`.
pub fn play_many_experts_from(
    oracle: &dyn LossOracle,
    horizon: Round,
    epsilon: f64,
    initial: ExpertId,
    rng: &mut GameRng,
) -> Result<GameTrajectory> {
    check_horizon(oracle, horizon)?;
    if let ExpertCount::Finite(k) = oracle.num_experts() {
        if initial.0 >= k {
            return Err(crate::error::Error::ExpertOutOfRange {
                index: initial.0,
                count: k,
            });
        }
    }
    let mut state = PackingState::new(epsilon, initial)?;
    let mut trajectory = GameTrajectory::new(Algorithm::ManyExperts, rng, horizon);
    for t in 1..=horizon {
        let step = state.step(t, oracle, rng)?;
        trajectory.push(RoundRecord {
            t,
            chosen: step.chosen,
            incurred: step.incurred,
            packing_size: step.packing_size,
            phase: step.phase,
            entropy: step.entropy,
        });
    }
    trajectory.packing = Some(state.summary());
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::LossMatrix;
    use crate::hedge::play_hedge;

    fn column_matrix(rows: &[Vec<f64>]) -> LossMatrix {
        LossMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn bound_examples() {
        assert!((theorem1_bound(1, 1, 0.1, 100).unwrap() - 22.0).abs() < 1e-12);
        // 2*0.05*5000 + 2*3 + 8*sqrt(5000*8*ln 8)
        let expected = 500.0 + 6.0 + 8.0 * (40_000.0 * 8f64.ln()).sqrt();
        let b = theorem1_bound(8, 3, 0.05, 5000).unwrap();
        assert!((b - expected).abs() < 1e-9);
        assert!((b - 2813.24).abs() < 0.01);
        assert!(theorem1_bound(2, 3, 0.1, 10).is_err());
        assert!(theorem1_bound(2, 0, 0.1, 10).is_err());
        assert!(theorem1_bound(2, 1, 0.1, 0).is_err());
    }

    #[test]
    fn bound_is_monotone_in_each_argument() {
        let base = theorem1_bound(4, 2, 0.2, 100).unwrap();
        assert!(theorem1_bound(5, 2, 0.2, 100).unwrap() > base);
        assert!(theorem1_bound(4, 3, 0.2, 100).unwrap() > base);
        assert!(theorem1_bound(4, 2, 0.3, 100).unwrap() > base);
        assert!(theorem1_bound(4, 2, 0.2, 101).unwrap() > base);
    }

    #[test]
    fn expansion_admits_spread_out_experts() {
        let m = column_matrix(&[vec![-1.0, 0.0, 1.0]]);
        let mut s = PackingState::new(0.2, ExpertId(0)).unwrap();
        let added = s.expand_packing(1, &m);
        assert_eq!(added, vec![ExpertId(1), ExpertId(2)]);
        assert_eq!(s.active().len(), 3);
    }

    #[test]
    fn covered_round_adds_nothing() {
        let m = column_matrix(&[vec![0.0, 0.3, -0.4]]);
        let mut s = PackingState::new(0.2, ExpertId(0)).unwrap();
        assert!(s.expand_packing(1, &m).is_empty());
        assert_eq!(s.active(), &[ExpertId(0)]);
    }

    #[test]
    fn binary_opposite_expert_is_admitted() {
        let m = column_matrix(&[vec![-1.0, -1.0, 1.0]]);
        let mut s = PackingState::new(0.4, ExpertId(0)).unwrap();
        assert_eq!(s.expand_packing(1, &m), vec![ExpertId(2)]);
    }

    #[test]
    fn admission_can_cover_later_experts() {
        // expert 1 at 0.5 covers expert 2 at 0.6 once admitted
        let m = column_matrix(&[vec![-0.5, 0.5, 0.6]]);
        let mut s = PackingState::new(0.25, ExpertId(0)).unwrap();
        assert_eq!(s.expand_packing(1, &m), vec![ExpertId(1)]);
    }

    #[test]
    fn restart_resets_phase_and_weights() {
        let m = column_matrix(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![-1.0, 1.0, 0.3, -0.3],
        ]);
        let mut s = PackingState::new(0.1, ExpertId(0)).unwrap();
        let mut rng = GameRng::new(0, 0);
        for t in 1..=3 {
            s.step(t, &m, &mut rng).unwrap();
        }
        assert_eq!(s.phase(), 2);
        assert_eq!(s.phase_start(), 3);
        assert_eq!(s.distribution(), vec![0.25; 4]);
        assert_eq!(s.inner().round(), 1);
        assert_eq!(
            s.restarts(),
            &[Restart { at: 0, size: 1 }, Restart { at: 3, size: 4 }]
        );
    }

    #[test]
    fn no_admission_keeps_old_clock() {
        let m = column_matrix(&[vec![1.0, -1.0], vec![0.2, -0.2], vec![0.1, 0.0]]);
        let mut s = PackingState::new(0.1, ExpertId(0)).unwrap();
        let mut rng = GameRng::new(0, 0);
        s.step(1, &m, &mut rng).unwrap();
        assert_eq!((s.phase(), s.phase_start()), (2, 1));
        s.step(2, &m, &mut rng).unwrap();
        // round 2 updated with eta = sqrt(8 ln 2 / (2 - 1))
        let eta = (8.0 * 2f64.ln()).sqrt();
        assert!((s.inner().log_weights()[0] + eta * 0.2).abs() < 1e-12);
        assert_eq!(s.inner().round(), 2);
        s.step(3, &m, &mut rng).unwrap();
        let eta3 = (8.0 * 2f64.ln() / 2.0).sqrt();
        assert!((s.inner().log_weights()[0] + eta * 0.2 + eta3 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn collapsed_environment_matches_single_expert_hedge() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|t| {
                let base = ((t * 13) % 7) as f64 / 10.0 - 0.3;
                vec![base, base + 0.05, base - 0.1]
            })
            .collect();
        let m = column_matrix(&rows);
        let traj = play_many_experts(&m, 40, 0.1, &mut GameRng::new(5, 0)).unwrap();
        assert_eq!(traj.final_packing_size(), Some(1));
        assert_eq!(traj.phases(), Some(1));
        let col0: f64 = rows.iter().map(|r| r[0]).sum();
        assert!((traj.learner_cumulative - col0).abs() < 1e-12);

        let single = column_matrix(&rows.iter().map(|r| vec![r[0]]).collect::<Vec<_>>());
        let h = play_hedge(&single, 40, &mut GameRng::new(5, 0)).unwrap();
        assert_eq!(h.learner_cumulative, traj.learner_cumulative);
    }

    #[test]
    fn epsilon_one_never_grows_on_unit_losses() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|t| {
                (0..6)
                    .map(|i| if (t + i) % 3 == 0 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let m = column_matrix(&rows);
        let traj = play_many_experts(&m, 30, 1.0, &mut GameRng::new(1, 0)).unwrap();
        assert_eq!(traj.final_packing_size(), Some(1));
    }

    #[test]
    fn restarts_strictly_increase() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|t| (0..10).map(|i| if t >= i { 1.0 } else { -1.0 }).collect())
            .collect();
        let m = column_matrix(&rows);
        let traj = play_many_experts(&m, 20, 0.5, &mut GameRng::new(2, 0)).unwrap();
        let packing = traj.packing.as_ref().unwrap();
        assert!(packing.restarts.len() > 2);
        for w in packing.restarts.windows(2) {
            assert!(w[0].at < w[1].at && w[0].size < w[1].size);
        }
        assert!(traj.phases().unwrap() <= traj.final_packing_size().unwrap());
        assert!(traj.is_consistent());
    }

    #[test]
    fn invalid_epsilon_and_initial_rejected() {
        let m = column_matrix(&[vec![0.0, 1.0]]);
        assert!(play_many_experts(&m, 1, 0.0, &mut GameRng::new(0, 0)).is_err());
        assert!(play_many_experts(&m, 1, 1.5, &mut GameRng::new(0, 0)).is_err());
        assert!(play_many_experts_from(&m, 1, 0.5, ExpertId(2), &mut GameRng::new(0, 0)).is_err());
    }
}
