//! Acceptance suite: each criterion runs at its stated size and tolerance
//! and prints one pass/fail line. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use manyexperts::validation::{run_suite, Suite};
use manyexperts::{GameRng, HedgeState};
use rand::Rng;

const SEED: u64 = 20_260_101;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite(s: Suite) -> Outcome {
    match run_suite(s, SEED) {
        Ok(report) => Outcome {
            passed: report.passed(),
            detail: report
                .checks
                .iter()
                .map(|c| {
                    format!(
                        "{}{}: {:.4} vs {:.4}",
                        if c.passed { "" } else { "FAILED " },
                        c.label,
                        c.measured,
                        c.bound
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
        },
        Err(e) => Outcome {
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Plain-probability Hedge: multiply weights by `exp(-eta l)` and normalize.
fn direct_weight_distributions(losses: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = losses[0].len();
    let mut w = vec![1.0f64; k];
    let mut out = Vec::new();
    for (t, row) in losses.iter().enumerate() {
        let z: f64 = w.iter().sum();
        out.push(w.iter().map(|x| x / z).collect());
        let eta = (8.0 * (k as f64).ln() / (t + 1) as f64).sqrt();
        for (wi, l) in w.iter_mut().zip(row) {
            *wi *= (-eta * l).exp();
        }
    }
    out
}

fn robustness() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = GameRng::new(SEED + seed, 0);
        let losses: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let reference = direct_weight_distributions(&losses);
        let mut h = HedgeState::new(8).unwrap();
        for (row, want) in losses.iter().zip(&reference) {
            let got = h.distribution();
            for (a, b) in got.iter().zip(want) {
                worst = worst.max((a - b).abs());
            }
            h.update(row).unwrap();
        }
    }

    // one expert always wins, so its log weight leads by ~10^4 at the end
    let (t_max, k) = (1_000_000, 1000);
    let mut h = HedgeState::new(k).unwrap();
    let mut row = vec![0.0; k];
    let mut finite = true;
    for t in 1..=t_max {
        for (i, l) in row.iter_mut().enumerate() {
            *l = if i == 0 {
                -1.0
            } else if (i + t) % 2 == 0 {
                1.0
            } else {
                -0.5
            };
        }
        h.update(&row).unwrap();
        if t % 100_000 == 0 {
            let p = h.distribution();
            let sum: f64 = p.iter().sum();
            finite &= p.iter().all(|x| x.is_finite() && *x >= 0.0) && (sum - 1.0).abs() < 1e-9;
        }
    }
    let p0 = h.distribution()[0];
    Outcome {
        passed: worst <= 1e-9 && finite && p0 > 0.999,
        detail: format!(
            "max deviation from direct weights {worst:.3e} (tol 1e-9); T=10^6 K=10^3 distributions finite: {finite}, leader mass {p0:.6}"
        ),
    }
}

fn run_cli(config: &Path, seed: &str, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_manyexperts"))
        .args(["run", "--config"])
        .arg(config)
        .args(["--seed", seed, "--out-dir"])
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "many_experts",
            "[game]\nalgorithm = \"many_experts\"\nepsilon = 0.5\n\n[environment]\nkind = \"clustered_binary\"\nrounds = 500\nexperts = 5000\nclusters = 8\n",
        ),
        (
            "meta_tuner",
            "[game]\nalgorithm = \"meta_tuner\"\n\n[environment]\nkind = \"low_rank\"\nrounds = 128\nexperts = 64\nrank = 2\nnoise = 0.05\n",
        ),
        (
            "hedge",
            "[game]\nalgorithm = \"hedge\"\n\n[environment]\nkind = \"iid_stochastic\"\nrounds = 300\nexperts = 10\nnoise = { kind = \"sign\" }\n",
        ),
    ];
    let mut identical = 0;
    let mut failures = Vec::new();
    for (name, text) in configs {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let a = dir.path().join(format!("{name}_a"));
        let b = dir.path().join(format!("{name}_b"));
        if !(run_cli(&cfg, "17", &a) && run_cli(&cfg, "17", &b)) {
            failures.push(format!("{name}: run failed"));
            continue;
        }
        for file in ["trajectory.csv", "summary.json"] {
            if std::fs::read(a.join(file)).unwrap() == std::fs::read(b.join(file)).unwrap() {
                identical += 1;
            } else {
                failures.push(format!("{name}/{file} differs"));
            }
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{identical}/6 output files byte-identical across repeated runs {failures:?}"
        ),
    }
}

fn main() -> ExitCode {
    type Criterion = (u8, &'static str, Option<f64>, Box<dyn Fn() -> Outcome>);
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "Hedge regret bound",
            Some(10.0),
            Box::new(|| suite(Suite::HedgeRegret)),
        ),
        (
            2,
            "covering/packing duality",
            Some(60.0),
            Box::new(|| suite(Suite::Duality)),
        ),
        (
            3,
            "per-run packing regret bound",
            None,
            Box::new(|| suite(Suite::PackingRegret)),
        ),
        (
            4,
            "packing validity",
            None,
            Box::new(|| suite(Suite::Packing)),
        ),
        (
            5,
            "few distinct experts",
            Some(120.0),
            Box::new(|| suite(Suite::DistinctRows)),
        ),
        (
            6,
            "bounded-variation lower bound",
            Some(30.0),
            Box::new(|| suite(Suite::LowerBound)),
        ),
        (7, "accuracy tuning", None, Box::new(|| suite(Suite::Meta))),
        (
            8,
            "log-sum inequality",
            Some(1.0),
            Box::new(|| suite(Suite::Logsum)),
        ),
        (9, "numerical robustness", None, Box::new(robustness)),
        (10, "reproducibility", None, Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let passed = outcome.passed && in_time;
        if !passed {
            failed += 1;
        }
        let limit = limit.map_or_else(String::new, |l| format!(", limit {l}s"));
        println!(
            "criterion {id:>2} [{}] {name}: {} ({secs:.2}s{limit})",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
