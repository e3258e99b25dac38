//! A centralized joint action-value model fitted to team rollouts.
//!
//! Where the training-time mixer only scores the actions a team would pick
//! itself, this model scores *any* joint action in *any* visited state,
//! which is exactly what an adversary needs to rank candidate action
//! substitutions. It is fitted on-policy from (s, a, r, s', a') tuples so
//! its values reflect how the observed behavior actually continues.

mod net;
mod sarsa;

pub use net::{load_joint_q, save_joint_q, JointQFile, JointQNet};
pub use sarsa::{train_sarsa, SarsaBehavior, SarsaConfig, SarsaOutcome};
