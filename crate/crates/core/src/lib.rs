//! Robustness-testing toolkit for cooperative multi-agent reinforcement learning.
//!
//! The pipeline has three stages:
//!
//! 1. **Train a team** ([`ctde`]): per-agent Q-networks with VDN or QMIX value
//!    factorization on toy Dec-POMDP environments ([`envs`]).
//! 2. **Learn the adversary's objective** ([`jointq`]): a Sarsa-trained joint
//!    action-value network fitted during execution-time data collection.
//! 3. **Attack** ([`deselect`], [`perturb`], [`harness`]): differential
//!    evolution picks the critical victim agents and their worst joint
//!    actions, then a targeted gradient attack perturbs each victim's
//!    observation inside an l-infinity budget to induce those actions.
//!
//! [`diffcore`] supplies the dense-tensor numerics and reverse-mode gradients
//! that everything above is built on.

pub mod ctde;
pub mod deselect;
pub mod diffcore;
pub mod envs;
pub mod harness;
pub mod jointq;
pub mod perturb;

mod error;
pub mod seeding;

pub use error::{Error, Result};
