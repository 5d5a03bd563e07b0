//! One seeded game: play, summarize, write the trajectory and summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use manyexperts::analysis::regret_from_totals;
use manyexperts::environments::EnvironmentSpec;
use manyexperts::validation::hedge_regret_bound;
use manyexperts::{
    play_hedge, play_many_experts, play_meta_with, theorem1_bound, Algorithm, GameRng,
    GameTrajectory, LossOracle,
};
use serde::{Deserialize, Serialize};

use crate::config::ResolvedRun;
use crate::error::{CliError, CliResult};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopySummary {
    pub level: usize,
    pub epsilon: f64,
    pub expected_cumulative: f64,
    pub realized_cumulative: f64,
    pub regret: f64,
    #[serde(rename = "K_p")]
    pub k_p: usize,
    pub p: usize,
    pub theorem1_bound: f64,
}

/// Machine-readable outcome of one game. Field order is fixed, so equal
/// runs serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub regret: f64,
    pub lemma1_bound: f64,
    /// Per-run packing bound; for the meta tuner the best copy's bound plus
    /// `4 sqrt(T ln R)`; absent for plain Hedge.
    pub theorem1_bound: Option<f64>,
    #[serde(rename = "K_p")]
    pub k_p: Option<usize>,
    pub p: Option<usize>,
    pub epsilon: Option<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub environment: EnvironmentSpec,
    pub learner_cumulative: f64,
    pub best_expert: usize,
    pub best_cumulative: f64,
    pub bound_holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copies: Option<Vec<CopySummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
}

/// Everything needed to reproduce a run plus non-reproducible metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ResolvedRun,
    pub outputs: Outputs,
    pub code_version: String,
    pub wall_time: f64,
}

pub fn play(run: &ResolvedRun) -> CliResult<(GameTrajectory, Summary)> {
    let env = run.environment.build(run.seed)?;
    let horizon = run.horizon.unwrap_or(env.horizon());
    if horizon > env.horizon() {
        return Err(CliError::config(
            "game.horizon",
            format!(
                "{horizon} exceeds the environment's {} rounds",
                env.horizon()
            ),
        ));
    }
    let mut rng = GameRng::new(run.seed, 0);
    let traj = match run.algorithm {
        Algorithm::Hedge => play_hedge(&env, horizon, &mut rng)?,
        Algorithm::ManyExperts => {
            let eps = run.epsilon.expect("validated");
            play_many_experts(&env, horizon, eps, &mut rng)?
        }
        Algorithm::MetaTuner => play_meta_with(&env, horizon, run.feedback, &mut rng)?,
    };

    let totals = if horizon == env.horizon() {
        env.cumulative_losses()?
    } else {
        let mut totals = vec![0.0; env.experts()];
        let mut row = Vec::new();
        for t in 1..=horizon {
            env.round_losses(t, &mut row)?;
            for (acc, l) in totals.iter_mut().zip(&row) {
                *acc += l;
            }
        }
        totals
    };
    let ledger = regret_from_totals(traj.learner_cumulative, &totals)?;
    let best = ledger.best_cumulative;
    let k = env.experts();

    let (packing_bound, k_p, p, copies) = match run.algorithm {
        Algorithm::Hedge => (None, Some(k), Some(1), None),
        Algorithm::ManyExperts => {
            let packing = traj.packing.as_ref().expect("recorded");
            let (kp, phases) = (packing.active.len(), packing.restarts.len());
            let bound = theorem1_bound(kp, phases, packing.epsilon, horizon)?;
            (Some(bound), Some(kp), Some(phases), None)
        }
        Algorithm::MetaTuner => {
            let meta = traj.meta.as_ref().expect("recorded");
            let copies = meta
                .copies
                .iter()
                .map(|c| {
                    let packing = c.trajectory.packing.as_ref().expect("recorded");
                    let (kp, phases) = (packing.active.len(), packing.restarts.len());
                    Ok(CopySummary {
                        level: c.level,
                        epsilon: c.epsilon,
                        expected_cumulative: c.expected_cumulative,
                        realized_cumulative: c.trajectory.learner_cumulative,
                        regret: c.trajectory.learner_cumulative - best,
                        k_p: kp,
                        p: phases,
                        theorem1_bound: theorem1_bound(kp, phases, c.epsilon, horizon)?,
                    })
                })
                .collect::<manyexperts::Result<Vec<_>>>()?;
            let levels = copies.len() as f64;
            let best_copy = copies
                .iter()
                .map(|c| c.theorem1_bound)
                .fold(f64::INFINITY, f64::min);
            let bound = best_copy + 4.0 * (horizon as f64 * levels.ln()).sqrt();
            (Some(bound), None, None, Some(copies))
        }
    };
    let hedge_bound = hedge_regret_bound(horizon, k);
    let bound_holds = match packing_bound {
        Some(b) => ledger.regret <= b,
        None => ledger.regret <= hedge_bound,
    };
    let summary = Summary {
        algorithm: run.algorithm,
        regret: ledger.regret,
        lemma1_bound: hedge_bound,
        theorem1_bound: packing_bound,
        k_p,
        p,
        epsilon: match run.algorithm {
            Algorithm::ManyExperts => run.epsilon,
            _ => None,
        },
        t: horizon,
        k,
        seed: run.seed,
        environment: run.environment.clone(),
        learner_cumulative: traj.learner_cumulative,
        best_expert: ledger.best_expert.index(),
        best_cumulative: best,
        bound_holds,
        copies,
    };
    Ok((traj, summary))
}

pub fn write_trajectory(traj: &GameTrajectory, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,phase,packing_size,chosen_expert,loss,cumulative_loss")?;
    let mut cumulative = 0.0;
    for r in &traj.rounds {
        cumulative += r.incurred;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t,
            r.phase,
            r.packing_size,
            r.chosen.index(),
            r.incurred,
            cumulative
        )?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Plays the game and writes trajectory, summary and manifest, in that
/// order. A bound violation is reported after all files are written.
pub fn cmd_run(run: &ResolvedRun, out_dir: &Path) -> CliResult<RunManifest> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let (traj, summary) = play(run)?;
    let outputs = Outputs {
        trajectory: out_dir.join(TRAJECTORY_FILE),
        summary: out_dir.join(SUMMARY_FILE),
    };
    write_trajectory(&traj, &outputs.trajectory)?;
    write_json(&summary, &outputs.summary)?;
    let manifest = RunManifest {
        config: run.clone(),
        outputs,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &out_dir.join(MANIFEST_FILE))?;
    println!(
        "{} on {}: T={} K={} regret={:.4} lemma1_bound={:.4} theorem1_bound={}",
        summary.algorithm,
        summary.environment.kind(),
        summary.t,
        summary.k,
        summary.regret,
        summary.lemma1_bound,
        summary
            .theorem1_bound
            .map_or_else(|| "n/a".to_string(), |b| format!("{b:.4}")),
    );
    if !summary.bound_holds {
        return Err(CliError::BoundViolation(format!(
            "regret {} exceeds its bound",
            summary.regret
        )));
    }
    Ok(manifest)
}
