//! Seeded environment generators, each realized as a [`LossOracle`], plus a
//! declarative [`EnvironmentSpec`] and export to disk.
//!
//! Every generator is a pure function of its parameters and seed. Generators
//! draw from a dedicated random stream so they never share randomness with a
//! learner seeded from the same number.

mod bounded_variation;
mod clustered;
mod iid;
mod low_rank;
mod matrix;
mod sparse;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bounded_variation::{make_bounded_variation_adversary, BoundedVariation};
pub use clustered::{make_clustered_binary, ClusterTruth, ClusteredBinary};
pub use iid::{make_iid_stochastic, IidDistribution, IidNoise, IidStochastic};
pub use low_rank::{make_low_rank, LowRank};
pub use matrix::{
    read_matrix, write_matrix, LossMatrix, Matrix, MatrixFormat, BINARY_MAGIC, BINARY_VERSION,
};
pub use sparse::{make_sparse_dictionary, SparseDictionary};

use crate::error::{invalid, Result};
use crate::game::{ExpertCount, ExpertId, LossOracle, Round};

/// Stream id reserved for environment generation.
pub const ENVIRONMENT_STREAM: u64 = u64::MAX;

pub(crate) fn generator_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ENVIRONMENT_STREAM);
    rng
}

fn default_iid_noise() -> IidNoise {
    IidNoise::None
}

/// Declarative description of an environment.
///
/// A missing `seed` is filled from the run's master seed, so one seed flag
/// controls all randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    FiniteMatrix {
        path: PathBuf,
    },
    ClusteredBinary {
        rounds: usize,
        experts: usize,
        clusters: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    LowRank {
        rounds: usize,
        experts: usize,
        rank: usize,
        noise: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    SparseDictionary {
        rounds: usize,
        experts: usize,
        atoms: usize,
        sparsity: usize,
        noise: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    BoundedVariation {
        rounds: usize,
        experts: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    IidStochastic {
        rounds: usize,
        #[serde(default)]
        experts: Option<usize>,
        #[serde(default)]
        means: Option<Vec<f64>>,
        #[serde(default = "default_iid_noise")]
        noise: IidNoise,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl EnvironmentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvironmentSpec::FiniteMatrix { .. } => "finite_matrix",
            EnvironmentSpec::ClusteredBinary { .. } => "clustered_binary",
            EnvironmentSpec::LowRank { .. } => "low_rank",
            EnvironmentSpec::SparseDictionary { .. } => "sparse_dictionary",
            EnvironmentSpec::BoundedVariation { .. } => "bounded_variation",
            EnvironmentSpec::IidStochastic { .. } => "iid_stochastic",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            EnvironmentSpec::FiniteMatrix { .. } => None,
            EnvironmentSpec::ClusteredBinary { seed, .. }
            | EnvironmentSpec::LowRank { seed, .. }
            | EnvironmentSpec::SparseDictionary { seed, .. }
            | EnvironmentSpec::BoundedVariation { seed, .. }
            | EnvironmentSpec::IidStochastic { seed, .. } => *seed,
        }
    }

    /// Copy with an absent seed replaced by `seed`.
    pub fn with_default_seed(&self, default: u64) -> EnvironmentSpec {
        let mut spec = self.clone();
        match &mut spec {
            EnvironmentSpec::FiniteMatrix { .. } => {}
            EnvironmentSpec::ClusteredBinary { seed, .. }
            | EnvironmentSpec::LowRank { seed, .. }
            | EnvironmentSpec::SparseDictionary { seed, .. }
            | EnvironmentSpec::BoundedVariation { seed, .. }
            | EnvironmentSpec::IidStochastic { seed, .. } => {
                seed.get_or_insert(default);
            }
        }
        spec
    }

    fn iid_means(experts: Option<usize>, means: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        match (experts, means) {
            (_, Some(m)) if experts.is_some_and(|k| k != m.len()) => Err(invalid(
                "experts",
                format!("{} experts but {} means", experts.unwrap(), m.len()),
            )),
            (_, Some(m)) => Ok(m.clone()),
            (Some(k), None) => Ok(vec![0.0; k]),
            (None, None) => Err(invalid("means", "give `means` or `experts`")),
        }
    }

    /// Generates the environment; a missing seed falls back to `default_seed`.
    pub fn build(&self, default_seed: u64) -> Result<Environment> {
        let seed = self.seed().unwrap_or(default_seed);
        Ok(match self {
            EnvironmentSpec::FiniteMatrix { path } => Environment::Finite(LossMatrix::read(path)?),
            &EnvironmentSpec::ClusteredBinary {
                rounds,
                experts,
                clusters,
                ..
            } => Environment::Clustered(make_clustered_binary(rounds, experts, clusters, seed)?),
            &EnvironmentSpec::LowRank {
                rounds,
                experts,
                rank,
                noise,
                ..
            } => Environment::LowRank(make_low_rank(rounds, experts, rank, noise, seed)?),
            &EnvironmentSpec::SparseDictionary {
                rounds,
                experts,
                atoms,
                sparsity,
                noise,
                ..
            } => Environment::Sparse(make_sparse_dictionary(
                rounds, experts, atoms, sparsity, noise, seed,
            )?),
            &EnvironmentSpec::BoundedVariation {
                rounds, experts, ..
            } => Environment::BoundedVariation(make_bounded_variation_adversary(
                rounds, experts, seed,
            )?),
            EnvironmentSpec::IidStochastic {
                rounds,
                experts,
                means,
                noise,
                ..
            } => {
                let means = Self::iid_means(*experts, means)?;
                Environment::Iid(make_iid_stochastic(
                    *rounds,
                    IidDistribution {
                        means,
                        noise: *noise,
                    },
                    seed,
                )?)
            }
        })
    }
}

/// A generated environment together with its ground truth.
#[derive(Debug, Clone)]
pub enum Environment {
    Finite(LossMatrix),
    Clustered(ClusteredBinary),
    LowRank(LowRank),
    Sparse(SparseDictionary),
    BoundedVariation(BoundedVariation),
    Iid(IidStochastic),
}

impl Environment {
    pub fn oracle(&self) -> &dyn LossOracle {
        match self {
            Environment::Finite(m) => m,
            Environment::Clustered(c) => c,
            Environment::LowRank(l) => &l.losses,
            Environment::Sparse(s) => &s.losses,
            Environment::BoundedVariation(b) => b,
            Environment::Iid(i) => &i.losses,
        }
    }

    pub fn experts(&self) -> usize {
        match self.oracle().num_experts() {
            ExpertCount::Finite(k) => k,
            ExpertCount::Unbounded => usize::MAX,
        }
    }

    /// Dense realized loss matrix.
    pub fn to_matrix(&self) -> LossMatrix {
        match self {
            Environment::Finite(m) => m.clone(),
            Environment::Clustered(c) => c.to_matrix(),
            Environment::LowRank(l) => l.losses.clone(),
            Environment::Sparse(s) => s.losses.clone(),
            Environment::BoundedVariation(b) => b.to_matrix(),
            Environment::Iid(i) => i.losses.clone(),
        }
    }

    /// Named ground-truth matrices (factors, dictionaries, noise).
    pub fn ground_truth_matrices(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            Environment::LowRank(l) => {
                vec![("left", &l.left), ("right", &l.right), ("noise", &l.noise)]
            }
            Environment::Sparse(s) => vec![
                ("dictionary", &s.dictionary),
                ("codes", &s.codes),
                ("noise", &s.noise),
            ],
            _ => Vec::new(),
        }
    }

    /// Ground truth that is not a matrix.
    pub fn ground_truth_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Environment::Finite(_) => json!({}),
            Environment::Clustered(c) => serde_json::to_value(c.truth()).expect("serializable"),
            Environment::LowRank(l) => json!({ "noise_level": l.noise_level }),
            Environment::Sparse(s) => {
                json!({ "sparsity": s.sparsity, "noise_level": s.noise_level })
            }
            Environment::BoundedVariation(b) => json!({
                "flip_round": (0..b.experts()).map(|i| b.flip_round(ExpertId(i))).collect::<Vec<_>>()
            }),
            Environment::Iid(i) => serde_json::to_value(&i.distribution).expect("serializable"),
        }
    }
}

impl LossOracle for Environment {
    fn loss(&self, t: Round, expert: ExpertId) -> f64 {
        self.oracle().loss(t, expert)
    }

    fn num_experts(&self) -> ExpertCount {
        self.oracle().num_experts()
    }

    fn horizon(&self) -> Round {
        self.oracle().horizon()
    }

    fn uncovered_expert_from(
        &self,
        t: Round,
        active: &[ExpertId],
        threshold: f64,
        start: usize,
    ) -> Option<ExpertId> {
        self.oracle()
            .uncovered_expert_from(t, active, threshold, start)
    }

    fn losses_of(&self, t: Round, experts: &[ExpertId], out: &mut Vec<f64>) {
        self.oracle().losses_of(t, experts, out)
    }

    fn round_losses(&self, t: Round, out: &mut Vec<f64>) -> Result<()> {
        self.oracle().round_losses(t, out)
    }

    fn cumulative_losses(&self) -> Result<Vec<f64>> {
        self.oracle().cumulative_losses()
    }
}

/// JSON sidecar written next to an exported matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: EnvironmentSpec,
    pub seed: Option<u64>,
    pub rounds: usize,
    pub experts: usize,
    pub format: MatrixFormat,
    pub matrix: String,
    pub ground_truth_files: BTreeMap<String, String>,
    pub ground_truth: serde_json::Value,
}

/// Writes `<stem>.<ext>`, one file per ground-truth matrix, and `<stem>.json`.
/// `spec` should already carry its resolved seed.
pub fn export_environment(
    env: &Environment,
    spec: &EnvironmentSpec,
    dir: &Path,
    stem: &str,
    format: MatrixFormat,
) -> Result<Sidecar> {
    let ext = format.extension();
    let matrix_name = format!("{stem}.{ext}");
    env.to_matrix().write(&dir.join(&matrix_name), format)?;
    let mut ground_truth_files = BTreeMap::new();
    for (name, m) in env.ground_truth_matrices() {
        let file = format!("{stem}.{name}.{ext}");
        write_matrix(m, &dir.join(&file), format)?;
        ground_truth_files.insert(name.to_string(), file);
    }
    let sidecar = Sidecar {
        spec: spec.clone(),
        seed: spec.seed(),
        rounds: env.horizon(),
        experts: env.experts(),
        format,
        matrix: matrix_name,
        ground_truth_files,
        ground_truth: env.ground_truth_json(),
    };
    let w = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
    serde_json::to_writer_pretty(w, &sidecar)?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_from_json_and_fills_seed() {
        let spec: EnvironmentSpec = serde_json::from_str(
            r#"{"kind":"clustered_binary","rounds":20,"experts":50,"clusters":4}"#,
        )
        .unwrap();
        assert_eq!(spec.seed(), None);
        let resolved = spec.with_default_seed(9);
        assert_eq!(resolved.seed(), Some(9));
        assert_eq!(resolved.with_default_seed(1).seed(), Some(9));
        let a = spec.build(9).unwrap().to_matrix();
        let b = resolved.build(0).unwrap().to_matrix();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: std::result::Result<EnvironmentSpec, _> = serde_json::from_str(
            r#"{"kind":"bounded_variation","rounds":3,"experts":8,"colour":1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn iid_means_resolution() {
        let spec = EnvironmentSpec::IidStochastic {
            rounds: 5,
            experts: Some(3),
            means: None,
            noise: IidNoise::Sign,
            seed: None,
        };
        assert_eq!(spec.build(1).unwrap().experts(), 3);
        let bad = EnvironmentSpec::IidStochastic {
            rounds: 5,
            experts: Some(2),
            means: Some(vec![0.0; 3]),
            noise: IidNoise::None,
            seed: None,
        };
        assert!(bad.build(1).is_err());
    }

    #[test]
    fn generator_stream_differs_from_game_stream() {
        use crate::game::GameRng;
        use rand::RngCore;
        let mut g = generator_rng(5);
        let mut h = GameRng::new(5, 0);
        assert_ne!(g.next_u64(), h.next_u64());
    }
}
