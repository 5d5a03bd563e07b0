//! Grid sweeps over seeds, accuracies, algorithms and environment
//! parameters.
//!
//! ```toml
//! [sweep]
//! seeds = 50                          # seeds --seed, --seed + 1, ...
//! algorithms = ["many_experts", "meta_tuner"]
//! epsilons = [0.125, 0.25, 0.5, 1.0]  # many_experts cells only
//!
//! [sweep.grid]                        # optional environment parameter grid
//! clusters = [4, 8]
//!
//! [environment]
//! kind = "clustered_binary"
//! rounds = 2000
//! experts = 10000
//! clusters = 8
//! ```
//!
//! Each run `(cell, seed)` is exactly the game `run` would play with that
//! seed, so a one-cell sweep reproduces `run`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use manyexperts::environments::EnvironmentSpec;
use manyexperts::validation::{mean, standard_error};
use manyexperts::{Algorithm, FeedbackMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{decode, resolve_paths, set_path, GameSection, ResolvedRun};
use crate::error::{CliError, CliResult};
use crate::run::play;

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    seeds: usize,
    algorithms: Vec<Algorithm>,
    #[serde(default)]
    epsilons: Vec<f64>,
    #[serde(default)]
    horizon: Option<usize>,
    #[serde(default)]
    feedback: FeedbackMode,
    #[serde(default)]
    grid: Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepSection,
    environment: Table,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub group: usize,
    pub params: String,
    pub algorithm: Algorithm,
    pub epsilon: Option<f64>,
    pub environment: EnvironmentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub regret: Option<f64>,
    pub k_p: Option<usize>,
    pub p: Option<usize>,
    pub error: Option<String>,
    #[serde(skip)]
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub cells: Vec<Cell>,
    pub seeds: Vec<u64>,
    horizon: Option<usize>,
    feedback: FeedbackMode,
}

fn grid_assignments(grid: &Table) -> CliResult<Vec<Vec<(String, Value)>>> {
    let mut combos = vec![Vec::new()];
    for (key, values) in grid {
        let values = match values {
            Value::Array(a) if !a.is_empty() => a.clone(),
            _ => {
                return Err(CliError::config(
                    format!("sweep.grid.{key}"),
                    "must be a non-empty list",
                ))
            }
        };
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

pub fn plan(path: &Path, table: &Table, master_seed: u64) -> CliResult<SweepPlan> {
    let file: SweepFile = decode(table, path)?;
    let s = file.sweep;
    if s.seeds == 0 {
        return Err(CliError::config("sweep.seeds", "grid is empty"));
    }
    if s.algorithms.is_empty() {
        return Err(CliError::config("sweep.algorithms", "grid is empty"));
    }
    if s.algorithms.contains(&Algorithm::ManyExperts) && s.epsilons.is_empty() {
        return Err(CliError::config(
            "sweep.epsilons",
            "many_experts cells need accuracies",
        ));
    }
    let mut cells = Vec::new();
    for (group, assignment) in grid_assignments(&s.grid)?.into_iter().enumerate() {
        let mut env_table = file.environment.clone();
        let mut params = Vec::new();
        for (k, v) in &assignment {
            set_path(&mut env_table, k, v.clone())?;
            params.push(format!("{k}={v}"));
        }
        let mut wrapped = Table::new();
        wrapped.insert("environment".into(), Value::Table(env_table));
        #[derive(Deserialize)]
        struct Env {
            environment: EnvironmentSpec,
        }
        let env: Env = decode(&wrapped, path)?;
        let environment = resolve_paths(env.environment, path);
        let params = params.join(";");
        for &algorithm in &s.algorithms {
            let epsilons: Vec<Option<f64>> = match algorithm {
                Algorithm::ManyExperts => s.epsilons.iter().map(|&e| Some(e)).collect(),
                _ => vec![None],
            };
            for epsilon in epsilons {
                cells.push(Cell {
                    group,
                    params: params.clone(),
                    algorithm,
                    epsilon,
                    environment: environment.clone(),
                });
            }
        }
    }
    let seeds = (0..s.seeds as u64)
        .map(|i| master_seed.wrapping_add(i))
        .collect();
    let plan = SweepPlan {
        cells,
        seeds,
        horizon: s.horizon,
        feedback: s.feedback,
    };
    // validate every cell before running anything
    for cell in &plan.cells {
        plan.resolve(cell, master_seed)?;
    }
    Ok(plan)
}

impl SweepPlan {
    fn resolve(&self, cell: &Cell, seed: u64) -> CliResult<ResolvedRun> {
        let game = GameSection {
            algorithm: cell.algorithm,
            epsilon: cell.epsilon,
            horizon: self.horizon,
            seed: Some(seed),
            feedback: self.feedback,
        };
        ResolvedRun::new(&game, cell.environment.clone(), None)
    }

    /// Runs every `(cell, seed)` on the current rayon pool; results come
    /// back in plan order.
    pub fn execute(&self) -> Vec<Vec<RunRow>> {
        let jobs: Vec<(usize, u64)> = (0..self.cells.len())
            .flat_map(|c| self.seeds.iter().map(move |&s| (c, s)))
            .collect();
        let rows: Vec<RunRow> = jobs
            .par_iter()
            .map(|&(c, seed)| {
                let outcome = self
                    .resolve(&self.cells[c], seed)
                    .and_then(|run| play(&run));
                match outcome {
                    Ok((_, summary)) => RunRow {
                        seed,
                        regret: Some(summary.regret),
                        k_p: summary.k_p,
                        p: summary.p,
                        error: None,
                        exit_code: None,
                    },
                    Err(e) => RunRow {
                        seed,
                        regret: None,
                        k_p: None,
                        p: None,
                        error: Some(e.to_string()),
                        exit_code: Some(e.exit_code()),
                    },
                }
            })
            .collect();
        rows.chunks(self.seeds.len())
            .map(<[RunRow]>::to_vec)
            .collect()
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '"'], " ")
}

/// Aggregated table, one row per cell plus a best-accuracy row per group.
pub fn render_table(plan: &SweepPlan, results: &[Vec<RunRow>]) -> String {
    let mut out = String::from(
        "group,environment,params,algorithm,epsilon,seeds,failures,mean_regret,stderr_regret,mean_k_p,mean_p,error\n",
    );
    let mut best: BTreeMap<usize, (f64, String)> = BTreeMap::new();
    for (cell, rows) in plan.cells.iter().zip(results) {
        let regrets: Vec<f64> = rows.iter().filter_map(|r| r.regret).collect();
        let failures = rows.len() - regrets.len();
        let kps: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.k_p.map(|v| v as f64))
            .collect();
        let ps: Vec<f64> = rows.iter().filter_map(|r| r.p.map(|v| v as f64)).collect();
        let avg = |xs: &[f64]| {
            if xs.is_empty() {
                String::new()
            } else {
                mean(xs).to_string()
            }
        };
        let line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            cell.group,
            cell.environment.kind(),
            clean(&cell.params),
            cell.algorithm,
            opt(cell.epsilon),
            rows.len(),
            failures,
            avg(&regrets),
            if regrets.is_empty() {
                String::new()
            } else {
                standard_error(&regrets).to_string()
            },
            avg(&kps),
            avg(&ps),
            rows.iter()
                .find_map(|r| r.error.as_deref())
                .map(clean)
                .unwrap_or_default(),
        );
        out.push_str(&line);
        if cell.algorithm == Algorithm::ManyExperts && failures == 0 {
            let m = mean(&regrets);
            let entry = best
                .entry(cell.group)
                .or_insert((f64::INFINITY, String::new()));
            if m < entry.0 {
                // same row relabelled as the best accuracy in hindsight
                let mut cols: Vec<&str> = line.trim_end_matches('\n').split(',').collect();
                cols[3] = "best_epsilon";
                *entry = (m, format!("{}\n", cols.join(",")));
            }
        }
    }
    for (_, (_, row)) in best {
        out.push_str(&row);
    }
    out
}

pub fn render_cell(rows: &[RunRow]) -> String {
    let mut out = String::from("seed,regret,k_p,p,error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.seed,
            opt(r.regret),
            opt(r.k_p),
            opt(r.p),
            r.error.as_deref().map(clean).unwrap_or_default()
        );
    }
    out
}

/// Runs the sweep, writes `sweep.csv` and `cells/cell_<i>.csv`, and
/// returns the first cell failure, if any, after everything is written.
pub fn cmd_sweep(path: &Path, table: &Table, seed: u64, out_dir: &Path) -> CliResult<()> {
    let plan = plan(path, table, seed)?;
    log::info!("{} cells x {} seeds", plan.cells.len(), plan.seeds.len());
    let results = plan.execute();
    std::fs::create_dir_all(out_dir.join("cells"))?;
    for (i, rows) in results.iter().enumerate() {
        std::fs::write(
            out_dir.join("cells").join(format!("cell_{i}.csv")),
            render_cell(rows),
        )?;
    }
    let table = render_table(&plan, &results);
    std::fs::write(out_dir.join(SWEEP_FILE), &table)?;
    print!("{table}");
    let failed: Vec<(usize, &RunRow)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, rows)| rows.iter().find(|r| r.error.is_some()).map(|r| (i, r)))
        .collect();
    match failed.first() {
        None => Ok(()),
        Some(&(i, row)) => {
            log::error!("{} of {} cells had failures", failed.len(), results.len());
            Err(CliError::CellFailure {
                cell: i,
                message: row.error.clone().unwrap_or_default(),
                code: row.exit_code.unwrap_or(1),
            })
        }
    }
}
