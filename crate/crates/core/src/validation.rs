//! Seeded validation suites that measure each regret or structural guarantee
//! against its bound. Every suite is deterministic in its master seed; runs
//! inside a suite use seeds `seed, seed + 1, ...` for both environment and
//! learner (on separate streams).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    admission_certificate_holds, covering_number_exact, duality_certificate, empirical_regret,
    is_packing, logsum_bound_check, variation_profile, DEFAULT_BUDGET,
};
use crate::environments::{
    make_bounded_variation_adversary, make_clustered_binary, make_iid_stochastic, make_low_rank,
    make_sparse_dictionary, Environment, IidDistribution, IidNoise, LossMatrix, Matrix,
};
use crate::error::{invalid, Result};
use crate::game::{GameRng, GameTrajectory, LossOracle};
use crate::hedge::play_hedge;
use crate::many_experts::{play_many_experts, theorem1_bound};
use crate::meta_tuner::{build_grid, copy_stream, play_meta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Duality,
    HedgeRegret,
    PackingRegret,
    Packing,
    DistinctRows,
    LowerBound,
    Logsum,
    Meta,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Duality,
        Suite::HedgeRegret,
        Suite::PackingRegret,
        Suite::Packing,
        Suite::DistinctRows,
        Suite::LowerBound,
        Suite::Logsum,
        Suite::Meta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::HedgeRegret => "lemma1",
            Suite::PackingRegret => "theorem1",
            Suite::Packing => "packing",
            Suite::DistinctRows => "corollary3",
            Suite::LowerBound => "lower_bound",
            Suite::Logsum => "logsum",
            Suite::Meta => "meta",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                invalid(
                    "suite",
                    format!("unknown suite `{s}`; expected one of {}", names.join(", ")),
                )
            })
    }
}

/// One measured-vs-bound comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub runs: usize,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}: measured {:.6} vs bound {:.6}",
                if c.passed { "PASS" } else { "FAIL" },
                self.suite,
                c.label,
                c.measured,
                c.bound
            )?;
        }
        Ok(())
    }
}

fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Check {
    Check {
        label: label.into(),
        measured,
        bound,
        passed: measured <= bound,
    }
}

fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Check {
    Check {
        label: label.into(),
        measured,
        bound,
        passed: measured >= bound,
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Duality => duality(seed),
        Suite::HedgeRegret => hedge_regret(seed),
        Suite::PackingRegret => packing_regret(seed),
        Suite::Packing => packing(seed),
        Suite::DistinctRows => distinct_rows(seed),
        Suite::LowerBound => lower_bound(seed),
        Suite::Logsum => logsum(seed),
        Suite::Meta => meta(seed),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over `sqrt(n)`).
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

fn seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| master.wrapping_add(i)).collect()
}

/// `4 sqrt(T ln K)`.
pub fn hedge_regret_bound(horizon: usize, experts: usize) -> f64 {
    4.0 * (horizon as f64 * (experts as f64).ln()).sqrt()
}

pub const HEDGE_SUITE_EXPERTS: usize = 10;
pub const HEDGE_SUITE_ROUNDS: usize = 10_000;
pub const HEDGE_SUITE_SEEDS: usize = 50;

/// Hedge on i.i.d. fair `±1` losses.
pub fn hedge_regret(seed: u64) -> Result<SuiteReport> {
    let regrets = seeds(seed, HEDGE_SUITE_SEEDS)
        .into_par_iter()
        .map(|s| {
            let env = make_iid_stochastic(
                HEDGE_SUITE_ROUNDS,
                IidDistribution {
                    means: vec![0.0; HEDGE_SUITE_EXPERTS],
                    noise: IidNoise::Sign,
                },
                s,
            )?;
            let traj = play_hedge(&env.losses, HEDGE_SUITE_ROUNDS, &mut GameRng::new(s, 0))?;
            Ok(empirical_regret(&traj, &env.losses)?.regret)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuiteReport {
        suite: Suite::HedgeRegret,
        seed,
        runs: regrets.len(),
        checks: vec![at_most(
            "mean Hedge regret (K=10, T=10^4, 50 seeds)",
            mean(&regrets),
            hedge_regret_bound(HEDGE_SUITE_ROUNDS, HEDGE_SUITE_EXPERTS),
        )],
    })
}

pub const DUALITY_INSTANCES: usize = 500;
pub const DUALITY_EPSILONS: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

/// Random small matrix with `K <= 8`, `T <= 5`, entries uniform in `[-1, 1]`.
pub fn random_small_matrix<R: Rng>(
    rng: &mut R,
    max_rounds: usize,
    max_experts: usize,
) -> LossMatrix {
    let rounds = rng.random_range(1..=max_rounds);
    let experts = rng.random_range(1..=max_experts);
    let m = Matrix::from_fn(rounds, experts, |_, _| rng.random_range(-1.0..=1.0));
    LossMatrix::new(m).expect("uniform draws are in range")
}

/// Exact sandwich on random small instances over the accuracy grid.
pub fn duality(seed: u64) -> Result<SuiteReport> {
    let mut rng = GameRng::new(seed, 0);
    let instances: Vec<LossMatrix> = (0..DUALITY_INSTANCES)
        .map(|_| random_small_matrix(&mut rng, 5, 8))
        .collect();
    let violations: usize = instances
        .par_iter()
        .map(|m| {
            DUALITY_EPSILONS
                .iter()
                .filter(|&&eps| match duality_certificate(m, eps) {
                    Ok(r) => {
                        let (Some(p2), Some(n), Some(p1)) = (
                            r.exact_packing_at_2eps,
                            r.exact_cover,
                            r.exact_packing_at_eps,
                        ) else {
                            return true;
                        };
                        !(p2 <= n && n <= p1)
                    }
                    Err(_) => true,
                })
                .count()
        })
        .sum();
    Ok(SuiteReport {
        suite: Suite::Duality,
        seed,
        runs: DUALITY_INSTANCES,
        checks: vec![at_most(
            "sandwich violations over 500 instances x 4 accuracies",
            violations as f64,
            0.0,
        )],
    })
}

/// The environments used by the per-run bound suite, each paired with the
/// accuracy the many-experts learner runs at.
pub fn shipped_environments(seed: u64) -> Result<Vec<(&'static str, Environment, f64)>> {
    let mut rng = GameRng::new(seed, 1);
    let finite = Matrix::from_fn(120, 40, |_, _| rng.random_range(-1.0..=1.0));
    Ok(vec![
        (
            "clustered_binary",
            Environment::Clustered(make_clustered_binary(400, 2000, 8, seed)?),
            0.5,
        ),
        (
            "low_rank",
            Environment::LowRank(make_low_rank(200, 256, 2, 0.05, seed)?),
            0.2,
        ),
        (
            "sparse_dictionary",
            Environment::Sparse(make_sparse_dictionary(200, 256, 6, 2, 0.05, seed)?),
            0.2,
        ),
        (
            "bounded_variation",
            Environment::BoundedVariation(make_bounded_variation_adversary(10, 1024, seed)?),
            0.5,
        ),
        (
            "iid_stochastic",
            Environment::Iid(make_iid_stochastic(
                500,
                IidDistribution {
                    means: (0..20).map(|i| -0.5 + i as f64 / 20.0).collect(),
                    noise: IidNoise::Uniform { width: 0.3 },
                },
                seed,
            )?),
            0.25,
        ),
        (
            "finite_matrix",
            Environment::Finite(LossMatrix::new(finite)?),
            0.5,
        ),
    ])
}

pub const SEEDS_PER_ENVIRONMENT: usize = 40;

#[derive(Debug, Clone)]
struct BoundRun {
    regret: f64,
    bound: f64,
    certificate: bool,
    packing_ok: bool,
}

fn bound_run(env: &Environment, epsilon: f64, seed: u64) -> Result<(GameTrajectory, BoundRun)> {
    let traj = play_many_experts(env, env.horizon(), epsilon, &mut GameRng::new(seed, 0))?;
    let regret = empirical_regret(&traj, env)?.regret;
    let packing = traj
        .packing
        .as_ref()
        .expect("many-experts runs record packing");
    let bound = theorem1_bound(
        packing.active.len(),
        packing.restarts.len(),
        epsilon,
        env.horizon(),
    )?;
    let certificate = admission_certificate_holds(env, packing);
    let packing_ok = is_packing(env, &packing.active, 2.0 * epsilon);
    Ok((
        traj,
        BoundRun {
            regret,
            bound,
            certificate,
            packing_ok,
        },
    ))
}

/// Per-run regret against `2 eps T + 2p + 8 sqrt(T K_p ln K_p)` on every
/// shipped environment.
pub fn packing_regret(seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut total_runs = 0;
    let mut total_violations = 0;
    let mut all_regret = 0.0;
    let mut all_bound = 0.0;
    let per_env: Vec<Vec<(&'static str, BoundRun)>> = seeds(seed, SEEDS_PER_ENVIRONMENT)
        .into_par_iter()
        .map(|s| {
            shipped_environments(s)?
                .into_iter()
                .map(|(name, env, eps)| Ok((name, bound_run(&env, eps, s)?.1)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = per_env[0].iter().map(|(n, _)| *n).collect();
    for (e, name) in names.iter().enumerate() {
        let runs: Vec<&BoundRun> = per_env.iter().map(|row| &row[e].1).collect();
        let violations = runs.iter().filter(|r| r.regret > r.bound).count();
        let regrets: Vec<f64> = runs.iter().map(|r| r.regret).collect();
        let bounds: Vec<f64> = runs.iter().map(|r| r.bound).collect();
        checks.push(at_most(
            format!("{name}: mean regret vs mean per-run bound"),
            mean(&regrets),
            mean(&bounds),
        ));
        total_runs += runs.len();
        total_violations += violations;
        all_regret += regrets.iter().sum::<f64>();
        all_bound += bounds.iter().sum::<f64>();
        if violations > 0 {
            log::warn!("{name}: {violations} runs exceeded their per-run bound");
        }
    }
    let fraction = total_violations as f64 / total_runs as f64;
    checks.push(Check {
        label: format!("fraction of {total_runs} runs above their bound"),
        measured: fraction,
        bound: 0.05,
        passed: fraction < 0.05,
    });
    checks.push(at_most(
        "overall mean regret vs overall mean bound",
        all_regret / total_runs as f64,
        all_bound / total_runs as f64,
    ));
    Ok(SuiteReport {
        suite: Suite::PackingRegret,
        seed,
        runs: total_runs,
        checks,
    })
}

/// Final active sets are valid `2 eps`-packings everywhere, and on instances
/// with at most 20 experts no larger than the exact `eps`-covering number.
pub fn packing(seed: u64) -> Result<SuiteReport> {
    let large: Vec<BoundRun> = seeds(seed, SEEDS_PER_ENVIRONMENT)
        .into_par_iter()
        .map(|s| {
            shipped_environments(s)?
                .into_iter()
                .map(|(_, env, eps)| Ok(bound_run(&env, eps, s)?.1))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let invalid_large = large
        .iter()
        .filter(|r| !(r.certificate && r.packing_ok))
        .count();

    let small = seeds(seed, 300)
        .into_par_iter()
        .map(|s| {
            let mut rng = GameRng::new(s, 2);
            let m = random_small_matrix(&mut rng, 30, 20);
            let eps = [0.05, 0.1, 0.25, 0.5, 1.0][rng.random_range(0..5)];
            let horizon = m.rounds();
            let traj = play_many_experts(&m, horizon, eps, &mut GameRng::new(s, 0))?;
            let packing = traj.packing.expect("recorded");
            let cover =
                covering_number_exact(&m, eps, DEFAULT_BUDGET).expect("K <= 20 fits the budget");
            let ok = admission_certificate_holds(&m, &packing)
                && is_packing(&m, &packing.active, 2.0 * eps)
                && packing.active.len() <= cover;
            Ok(ok)
        })
        .collect::<Result<Vec<bool>>>()?;
    let invalid_small = small.iter().filter(|ok| !**ok).count();
    Ok(SuiteReport {
        suite: Suite::Packing,
        seed,
        runs: large.len() + small.len(),
        checks: vec![
            at_most(
                format!(
                    "invalid 2eps-packings over {} shipped-environment runs",
                    large.len()
                ),
                invalid_large as f64,
                0.0,
            ),
            at_most(
                format!(
                    "small instances (K<=20) failing packing or |S|<=N(eps), of {}",
                    small.len()
                ),
                invalid_small as f64,
                0.0,
            ),
        ],
    })
}

pub const DISTINCT_SUITE_ROUNDS: usize = 5000;
pub const DISTINCT_SUITE_EXPERTS: usize = 100_000;
pub const DISTINCT_SUITE_CLUSTERS: usize = 8;
pub const DISTINCT_SUITE_EPSILON: f64 = 0.5;
pub const DISTINCT_SUITE_SEEDS: usize = 50;

/// `N + 8 sqrt(T N ln N)`.
pub fn distinct_rows_bound(distinct: usize, horizon: usize) -> f64 {
    let n = distinct as f64;
    n + 8.0 * (horizon as f64 * n * n.ln()).sqrt()
}

pub fn distinct_rows(seed: u64) -> Result<SuiteReport> {
    let runs = seeds(seed, DISTINCT_SUITE_SEEDS)
        .into_par_iter()
        .map(|s| {
            let env = make_clustered_binary(
                DISTINCT_SUITE_ROUNDS,
                DISTINCT_SUITE_EXPERTS,
                DISTINCT_SUITE_CLUSTERS,
                s,
            )?;
            let traj = play_many_experts(
                &env,
                DISTINCT_SUITE_ROUNDS,
                DISTINCT_SUITE_EPSILON,
                &mut GameRng::new(s, 0),
            )?;
            let regret = empirical_regret(&traj, &env)?.regret;
            let packing = traj.packing.expect("recorded");
            let valid = is_packing(&env, &packing.active, 2.0 * DISTINCT_SUITE_EPSILON);
            Ok((regret, packing.active.len(), valid))
        })
        .collect::<Result<Vec<_>>>()?;
    let regrets: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let max_kp = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let invalid = runs.iter().filter(|r| !r.2).count();
    Ok(SuiteReport {
        suite: Suite::DistinctRows,
        seed,
        runs: runs.len(),
        checks: vec![
            at_most(
                "max K_p over runs",
                max_kp as f64,
                DISTINCT_SUITE_CLUSTERS as f64,
            ),
            at_most("invalid packings", invalid as f64, 0.0),
            at_most(
                "mean regret (N=8, K=10^5, T=5000, eps=0.5)",
                mean(&regrets),
                distinct_rows_bound(DISTINCT_SUITE_CLUSTERS, DISTINCT_SUITE_ROUNDS),
            ),
        ],
    })
}

pub const LOWER_BOUND_ROUNDS: usize = 12;
pub const LOWER_BOUND_EXPERTS: usize = 4096;
pub const LOWER_BOUND_SEEDS: usize = 200;

/// Hedge against the halving adversary.
pub fn lower_bound(seed: u64) -> Result<SuiteReport> {
    let runs = seeds(seed, LOWER_BOUND_SEEDS)
        .into_par_iter()
        .map(|s| {
            let env = make_bounded_variation_adversary(LOWER_BOUND_ROUNDS, LOWER_BOUND_EXPERTS, s)?;
            let traj = play_hedge(&env, LOWER_BOUND_ROUNDS, &mut GameRng::new(s, 0))?;
            let regret = empirical_regret(&traj, &env)?.regret;
            let variation = variation_profile(&env.to_matrix()).max();
            Ok((regret, variation))
        })
        .collect::<Result<Vec<_>>>()?;
    let regrets: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let max_variation = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SuiteReport {
        suite: Suite::LowerBound,
        seed,
        runs: runs.len(),
        checks: vec![
            at_least(
                "mean Hedge regret (T=12, K=4096, 200 seeds) vs 0.9 T",
                mean(&regrets),
                0.9 * LOWER_BOUND_ROUNDS as f64,
            ),
            at_most("max expert variation", max_variation, 2.0),
        ],
    })
}

pub const LOGSUM_SEQUENCES: usize = 1000;
pub const LOGSUM_MAX: u64 = 10_000;

/// Random strictly increasing sequence `1 = a_1 < ... < a_n <= max`.
pub fn random_increasing_sequence<R: Rng>(rng: &mut R, max: u64) -> Vec<u64> {
    let last = rng.random_range(1..=max);
    let len = rng.random_range(1..=last.min(200));
    let mut picks: Vec<u64> =
        rand::seq::index::sample(rng, (last - 1) as usize, (len - 1) as usize)
            .into_iter()
            .map(|i| i as u64 + 2)
            .collect();
    picks.sort_unstable();
    let mut seq = vec![1];
    seq.extend(picks);
    seq
}

pub fn logsum(seed: u64) -> Result<SuiteReport> {
    let mut rng = GameRng::new(seed, 0);
    let mut violations = 0;
    for _ in 0..LOGSUM_SEQUENCES {
        let seq = random_increasing_sequence(&mut rng, LOGSUM_MAX);
        if !logsum_bound_check(&seq)? {
            violations += 1;
        }
    }
    Ok(SuiteReport {
        suite: Suite::Logsum,
        seed,
        runs: LOGSUM_SEQUENCES,
        checks: vec![at_most(
            "log-sum violations over 1000 sequences",
            violations as f64,
            0.0,
        )],
    })
}

pub const META_SEEDS: usize = 50;

/// Meta fixtures: a clustered binary environment and a low-rank one.
pub fn meta_fixtures(seed: u64) -> Result<Vec<(&'static str, Environment)>> {
    Ok(vec![
        (
            "clustered_binary",
            Environment::Clustered(make_clustered_binary(1000, 5000, 8, seed)?),
        ),
        (
            "low_rank",
            Environment::LowRank(make_low_rank(256, 128, 2, 0.05, seed)?),
        ),
    ])
}

/// Per-seed outcome of one meta game.
#[derive(Debug, Clone)]
pub struct MetaRun {
    pub meta_regret: f64,
    pub copy_regrets: Vec<f64>,
    pub copies_match_standalone: bool,
}

pub fn meta_run(env: &Environment, seed: u64) -> Result<MetaRun> {
    let horizon = env.horizon();
    let traj = play_meta(env, horizon, &mut GameRng::new(seed, 0))?;
    let totals = env.cumulative_losses()?;
    let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let meta = traj.meta.as_ref().expect("meta runs record copies");
    let copy_regrets = meta
        .copies
        .iter()
        .map(|c| c.trajectory.learner_cumulative - best)
        .collect();
    let mut copies_match_standalone = true;
    for copy in &meta.copies {
        let mut rng = GameRng::new(seed, copy_stream(0, copy.level));
        let alone = play_many_experts(env, horizon, copy.epsilon, &mut rng)?;
        copies_match_standalone &= alone == copy.trajectory;
    }
    Ok(MetaRun {
        meta_regret: traj.learner_cumulative - best,
        copy_regrets,
        copies_match_standalone,
    })
}

pub fn meta(seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut runs_total = 0;
    for (e, name) in ["clustered_binary", "low_rank"].into_iter().enumerate() {
        let runs = seeds(seed, META_SEEDS)
            .into_par_iter()
            .map(|s| {
                let env = meta_fixtures(s)?.swap_remove(e).1;
                meta_run(&env, s)
            })
            .collect::<Result<Vec<MetaRun>>>()?;
        runs_total += runs.len();
        let horizon = meta_fixtures(seed)?[e].1.horizon();
        let levels = build_grid(horizon)?.len();
        let copies = runs[0].copy_regrets.len();
        let copy_means: Vec<f64> = (0..copies)
            .map(|r| {
                mean(
                    &runs
                        .iter()
                        .map(|run| run.copy_regrets[r])
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let (best_copy, best_mean) = copy_means
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one copy");
        let meta_regrets: Vec<f64> = runs.iter().map(|r| r.meta_regret).collect();
        let paired: Vec<f64> = runs
            .iter()
            .map(|r| r.meta_regret - r.copy_regrets[best_copy])
            .collect();
        let overhead = 4.0 * (horizon as f64 * (levels as f64).ln()).sqrt();
        checks.push(at_most(
            format!(
                "{name}: mean meta regret vs best copy ({}) + 4 sqrt(T ln R) + 3 SE",
                best_copy + 1
            ),
            mean(&meta_regrets),
            best_mean + overhead + 3.0 * standard_error(&paired),
        ));
        let mismatches = runs.iter().filter(|r| !r.copies_match_standalone).count();
        checks.push(at_most(
            format!("{name}: seeds whose embedded copies differ from standalone runs"),
            mismatches as f64,
            0.0,
        ));
    }
    Ok(SuiteReport {
        suite: Suite::Meta,
        seed,
        runs: runs_total,
        checks,
    })
}
