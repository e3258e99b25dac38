//! Centralized training of decentralized teams.
//!
//! Each agent carries an action-value network over its own observation
//! history; a mixer combines per-agent values into one team value that the
//! temporal-difference loss is applied to. Mixers are monotone in every
//! agent value, so decentralized greedy execution agrees with the
//! centralized maximization — a property [`igm_check`] verifies
//! exhaustively on small action spaces.

mod checkpoint;
mod igm;
mod mixer;
mod policy;
mod team;
mod train;

pub use checkpoint::{env_fingerprint, load_team, save_team, team_fingerprint, TeamMeta};
pub use igm::{igm_check, igm_check_team, IgmReport};
pub use mixer::{JointMixer, MixGrad, MixerKind, QmixMixer, VdnMixer};
pub use policy::{greedy_index, AgentPolicy, ObservationHistory};
pub use team::CtdeTeam;
pub use train::{td_train, MixerChoice, TdTrainConfig, TrainOutcome};
