//! Online learning with many experts whose losses are measured by how
//! far apart their loss sequences are.
//!
//! The crate provides the exponential-weights learner ([`hedge`]), the
//! packing learner that tracks an adaptively grown set of representative
//! experts ([`many_experts`]), a tuner that runs the packing learner at a
//! grid of accuracies ([`meta_tuner`]), synthetic and file-backed loss
//! environments ([`environments`]), exact covering and packing tools
//! ([`analysis`]) and seeded bound checks ([`validation`]).

pub mod analysis;
pub mod environments;
pub mod error;
pub mod game;
pub mod hedge;
pub mod many_experts;
pub mod meta_tuner;
pub mod validation;

pub use error::{Error, Result};
pub use game::{
    Algorithm, ExpertCount, ExpertId, FeedbackMode, GameConfig, GameRng, GameTrajectory,
    LossOracle, LossValue, Round, RoundRecord,
};
pub use hedge::{play_hedge, HedgeState};
pub use many_experts::{play_many_experts, theorem1_bound, PackingState};
pub use meta_tuner::{build_grid, play_meta, play_meta_with, EpsilonGrid};
