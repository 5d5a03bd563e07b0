//! End-to-end checks of the `manyexperts` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manyexperts"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const HEDGE_IID: &str = r#"
[game]
algorithm = "hedge"
seed = 7

[environment]
kind = "iid_stochastic"
rounds = 100
experts = 2
noise = { kind = "sign" }
"#;

#[test]
fn hedge_run_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HEDGE_IID);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,phase,packing_size,chosen_expert,loss,cumulative_loss"
    );
    assert_eq!(lines.count(), 100);
    let s = summary(&out_dir);
    for key in [
        "regret",
        "lemma1_bound",
        "theorem1_bound",
        "K_p",
        "p",
        "epsilon",
        "T",
        "K",
        "seed",
        "environment",
    ] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["seed"], 7);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn summary_regret_rederives_from_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"
[game]
algorithm = "many_experts"
epsilon = 0.1

[environment]
kind = "low_rank"
rounds = 150
experts = 60
rank = 2
noise = 0.05
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cumulative: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    let s = summary(&out_dir);
    let regret = cumulative - s["best_cumulative"].as_f64().unwrap();
    assert!((regret - s["regret"].as_f64().unwrap()).abs() < 1e-9);
    assert!((cumulative - s["learner_cumulative"].as_f64().unwrap()).abs() < 1e-9);
    // K_p and p also follow from the trajectory: final packing and phase count
    let phases: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(phases.len() as u64 <= s["p"].as_u64().unwrap());
}

#[test]
fn meta_run_lists_grid_copies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "meta.toml",
        r#"
[game]
algorithm = "meta_tuner"

[environment]
kind = "iid_stochastic"
rounds = 8
experts = 3
noise = { kind = "sign" }
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let s = summary(&out_dir);
    let eps: Vec<f64> = s["copies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["epsilon"].as_f64().unwrap())
        .collect();
    assert_eq!(eps, vec![1.0, 0.5, 0.25]);
}

#[test]
fn configuration_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.toml", HEDGE_IID);
    let c = cfg.to_str().unwrap();
    let out_dir = dir.path().join("o");
    let o = out_dir.to_str().unwrap();

    let out = run(&[
        "run",
        "--config",
        c,
        "--out-dir",
        o,
        "--set",
        "game.algorithm=many_experts",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("game.epsilon"));

    let out = run(&[
        "run",
        "--config",
        c,
        "--out-dir",
        o,
        "--set",
        "environment.colour=3",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = run(&[
        "run",
        "--config",
        c,
        "--out-dir",
        o,
        "--set",
        "game.horizon=500",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("game.horizon"));

    let bad = write(dir.path(), "bad.toml", "[game\nalgorithm=");
    assert_eq!(
        code(&run(&[
            "run",
            "--config",
            bad.to_str().unwrap(),
            "--out-dir",
            o
        ])),
        2
    );
    // nothing ran, so nothing was written
    assert!(!out_dir.join("summary.json").exists());
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        code(&run(&[
            "run",
            "--config",
            missing.to_str().unwrap(),
            "--seed",
            "1"
        ])),
        3
    );
    let cfg = write(
        dir.path(),
        "f.toml",
        "[game]\nalgorithm = \"hedge\"\nseed = 1\n\n[environment]\nkind = \"finite_matrix\"\npath = \"nowhere.csv\"\n",
    );
    assert_eq!(code(&run(&["run", "--config", cfg.to_str().unwrap()])), 3);
}

#[test]
fn seed_is_mandatory_for_sweep_and_validate() {
    assert_eq!(code(&run(&["validate", "logsum"])), 2);
    assert_eq!(code(&run(&["sweep", "--config", "x.toml"])), 2);
}

#[test]
fn validate_reports_and_rejects_unknown_suites() {
    let out = run(&["validate", "logsum", "--seed", "5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] logsum"), "{text}");
    assert_eq!(code(&run(&["validate", "nonsense", "--seed", "5"])), 2);
}

#[test]
fn csv_export_of_hand_written_matrix_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = "0.5,-1,0\n1,0.25,-0.75\n-0.125,0.1,0.3\n";
    write(dir.path(), "fixture.csv", fixture);
    let cfg = write(
        dir.path(),
        "env.toml",
        "[environment]\nkind = \"finite_matrix\"\npath = \"fixture.csv\"\n",
    );
    let out_dir = dir.path().join("exp");
    let out = run(&[
        "export-env",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--stem",
        "m",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(out_dir.join("m.csv")).unwrap(),
        fixture
    );
}

#[test]
fn binary_export_reingests_bit_for_bit_and_sidecar_regenerates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "env.toml",
        "[environment]\nkind = \"sparse_dictionary\"\nrounds = 40\nexperts = 30\natoms = 5\nsparsity = 2\nnoise = 0.05\n",
    );
    let out_dir = dir.path().join("exp");
    let o = out_dir.to_str().unwrap();
    let out = run(&[
        "export-env",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "13",
        "--out-dir",
        o,
        "--format",
        "binary",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let original = std::fs::read(out_dir.join("sparse_dictionary.chlm")).unwrap();

    // sidecar carries the seed and regenerates the same matrix
    let sidecar: Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("sparse_dictionary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["seed"], 13);
    assert_eq!(sidecar["spec"]["seed"], 13);
    let again = dir.path().join("again");
    let out = run(&[
        "export-env",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "13",
        "--out-dir",
        again.to_str().unwrap(),
        "--format",
        "binary",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(again.join("sparse_dictionary.chlm")).unwrap(),
        original
    );

    // re-ingest via finite_matrix and re-export: identical bytes
    let fm = write(
        dir.path(),
        "fm.toml",
        &format!(
            "[environment]\nkind = \"finite_matrix\"\npath = \"{}\"\n",
            out_dir.join("sparse_dictionary.chlm").display()
        ),
    );
    let round = dir.path().join("round");
    let out = run(&[
        "export-env",
        "--config",
        fm.to_str().unwrap(),
        "--out-dir",
        round.to_str().unwrap(),
        "--format",
        "binary",
        "--stem",
        "r",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(round.join("r.chlm")).unwrap(), original);
}

const SWEEP: &str = r#"
[sweep]
seeds = 4
algorithms = ["many_experts", "hedge"]
epsilons = [0.25, 1.0]

[sweep.grid]
clusters = [3, 6]

[environment]
kind = "clustered_binary"
rounds = 60
experts = 200
clusters = 4
"#;

#[test]
fn sweep_is_deterministic_and_has_best_epsilon_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SWEEP);
    let mut tables = Vec::new();
    for name in ["a", "b"] {
        let o = dir.path().join(name);
        let out = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out-dir",
            o.to_str().unwrap(),
            "--parallelism",
            "2",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        tables.push(std::fs::read_to_string(o.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    // 2 groups x (2 accuracies + hedge) cells, plus a best row per group
    assert_eq!(tables[0].lines().count(), 1 + 6 + 2);
    assert_eq!(
        tables[0]
            .lines()
            .filter(|l| l.contains(",best_epsilon,"))
            .count(),
        2
    );
}

#[test]
fn one_cell_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "s.toml",
        "[sweep]\nseeds = 1\nalgorithms = [\"many_experts\"]\nepsilons = [0.2]\n\n[environment]\nkind = \"low_rank\"\nrounds = 80\nexperts = 40\nrank = 2\nnoise = 0.05\n",
    );
    let single = write(
        dir.path(),
        "r.toml",
        "[game]\nalgorithm = \"many_experts\"\nepsilon = 0.2\n\n[environment]\nkind = \"low_rank\"\nrounds = 80\nexperts = 40\nrank = 2\nnoise = 0.05\n",
    );
    let so = dir.path().join("s");
    let ro = dir.path().join("r");
    assert_eq!(
        code(&run(&[
            "sweep",
            "--config",
            sweep.to_str().unwrap(),
            "--seed",
            "21",
            "--out-dir",
            so.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "run",
            "--config",
            single.to_str().unwrap(),
            "--seed",
            "21",
            "--out-dir",
            ro.to_str().unwrap()
        ])),
        0
    );
    let cell = std::fs::read_to_string(so.join("cells/cell_0.csv")).unwrap();
    let row: Vec<&str> = cell.lines().nth(1).unwrap().split(',').collect();
    let s = summary(&ro);
    assert_eq!(row[0], "21");
    assert_eq!(
        row[1].parse::<f64>().unwrap(),
        s["regret"].as_f64().unwrap()
    );
    assert_eq!(row[2].parse::<u64>().unwrap(), s["K_p"].as_u64().unwrap());
    assert_eq!(row[3].parse::<u64>().unwrap(), s["p"].as_u64().unwrap());
}

#[test]
fn failing_cells_are_recorded_and_sweep_finishes() {
    let dir = tempfile::tempdir().unwrap();
    // 300 clusters cannot fit in 200 experts; that cell fails at run time
    let cfg = write(
        dir.path(),
        "s.toml",
        &SWEEP.replace("clusters = [3, 6]", "clusters = [3, 300]"),
    );
    let o = dir.path().join("o");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out-dir",
        o.to_str().unwrap(),
    ]);
    assert_ne!(code(&out), 0);
    let table = std::fs::read_to_string(o.join("sweep.csv")).unwrap();
    let bad: Vec<&str> = table
        .lines()
        .filter(|l| l.contains("clusters=300"))
        .collect();
    assert!(
        bad.iter().all(|l| l.split(',').nth(6) == Some("4")),
        "{table}"
    );
    let good = table.lines().filter(|l| l.contains("clusters=3,")).count();
    assert_eq!(good, 3 + 1);
}

#[test]
fn accuracy_sweep_has_interior_optimum() {
    // spread means in random order: a coarse packing misses the best
    // expert, a fine one pays for tracking hundreds of experts
    use rand::seq::SliceRandom;
    let k = 400;
    let mut means: Vec<String> = (0..k)
        .map(|i| format!("{}", -0.6 + 1.2 * i as f64 / (k - 1) as f64))
        .collect();
    means.shuffle(&mut manyexperts::GameRng::new(1, 0));
    let text = format!(
        "[sweep]\nseeds = 6\nalgorithms = [\"many_experts\"]\nepsilons = [0.0078125, 0.015625, 0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0]\n\n\
         [environment]\nkind = \"iid_stochastic\"\nrounds = 2000\nnoise = {{ kind = \"uniform\", width = 0.02 }}\nmeans = [{}]\n",
        means.join(", ")
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &text);
    let o = dir.path().join("o");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
        "--out-dir",
        o.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(o.join("sweep.csv")).unwrap();
    let regret: Vec<f64> = table
        .lines()
        .filter(|l| l.contains(",many_experts,"))
        .map(|l| l.split(',').nth(7).unwrap().parse().unwrap())
        .collect();
    assert_eq!(regret.len(), 8);
    let best = (0..8)
        .min_by(|&a, &b| regret[a].total_cmp(&regret[b]))
        .unwrap();
    assert!(best != 0 && best != 7, "{regret:?}");
    let best_row = table
        .lines()
        .find(|l| l.contains(",best_epsilon,"))
        .unwrap();
    assert_eq!(
        best_row.split(',').nth(7).unwrap().parse::<f64>().unwrap(),
        regret[best]
    );
}
